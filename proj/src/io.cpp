#include "hkreg/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

namespace hkreg {

namespace {

using nlohmann::json;

std::string trimmed(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
    --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trimmed(line.substr(start)));
      return cells;
    }
    cells.push_back(trimmed(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("csv line " + std::to_string(line_no) + ": " +
                           what);
}

double parse_cell(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    csv_error(line_no, "cannot parse '" + cell + "' as a number");
  return v;
}

std::string kind_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kEm: return "em";
    case EstimatorKind::kHk: return "hk";
    case EstimatorKind::kEmCapped: return "em-capped";
  }
  throw std::logic_error("unknown estimator kind");
}

EstimatorKind kind_from_string(const std::string& s) {
  if (s == "em") return EstimatorKind::kEm;
  if (s == "hk") return EstimatorKind::kHk;
  if (s == "em-capped") return EstimatorKind::kEmCapped;
  throw std::runtime_error("model json: unknown estimator kind '" + s + "'");
}

void write_points_csv(std::ostream& out, const std::vector<Point>& xs,
                      const Eigen::VectorXd& col, const char* col_name) {
  if (xs.empty()) throw std::invalid_argument("csv write: empty design");
  if (static_cast<Eigen::Index>(xs.size()) != col.size())
    throw std::invalid_argument("csv write: row count mismatch");
  const std::size_t d = xs[0].size();
  for (std::size_t j = 1; j <= d; ++j) out << 'x' << j << ',';
  out << col_name << '\n';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != d)
      throw std::invalid_argument("csv write: ragged design");
    for (std::size_t j = 0; j < d; ++j) out << format_double(xs[i][j]) << ',';
    out << format_double(col[static_cast<Eigen::Index>(i)]) << '\n';
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::logic_error("format_double: buffer");
  return std::string(buf, ptr);
}

DataSet read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  const std::vector<std::string> header = split_row(line);
  std::size_t d = header.size();
  bool has_y = false;
  if (!header.empty() && header.back() == "y") {
    has_y = true;
    d -= 1;
  }
  if (d < 1) csv_error(1, "header must be x1,...,xd or x1,...,xd,y");
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j + 1))
      csv_error(1, "expected column 'x" + std::to_string(j + 1) + "', got '" +
                       header[j] + "'");
  }

  DataSet data;
  data.has_response = has_y;
  std::vector<double> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) {
      // A trailing newline is fine; blank lines elsewhere are not.
      if (in.peek() == std::char_traits<char>::eof()) break;
      csv_error(line_no, "blank line");
    }
    const std::vector<std::string> cells = split_row(line);
    if (cells.size() != header.size())
      csv_error(line_no, "expected " + std::to_string(header.size()) +
                             " columns, got " + std::to_string(cells.size()));
    Point x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_cell(cells[j], line_no);
    data.xs.push_back(std::move(x));
    if (has_y) ys.push_back(parse_cell(cells[d], line_no));
  }
  if (data.xs.empty()) throw std::runtime_error("csv: no data rows");
  if (has_y) {
    data.y.resize(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < ys.size(); ++i)
      data.y[static_cast<Eigen::Index>(i)] = ys[i];
  }
  return data;
}

DataSet read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(in);
}

void write_dataset_csv(std::ostream& out, const std::vector<Point>& xs,
                       const Eigen::VectorXd& y) {
  write_points_csv(out, xs, y, "y");
}

void write_predictions_csv(std::ostream& out, const std::vector<Point>& xs,
                           const Eigen::VectorXd& yhat) {
  write_points_csv(out, xs, yhat, "yhat");
}

std::string model_to_json(const FittedModel& model) {
  json j;
  j["kind"] = kind_string(model.kind);
  j["d"] = model.fn.d;
  j["p"] = static_cast<std::int64_t>(model.params);
  if (std::isfinite(model.budget)) j["V"] = model.budget;
  json anchors = json::array();
  for (const Point& z : model.fn.anchors) anchors.push_back(z);
  j["anchors"] = std::move(anchors);
  j["coefficients"] = std::vector<double>(
      model.fn.coeffs.data(), model.fn.coeffs.data() + model.fn.coeffs.size());
  j["lattice_design"] = model.lattice_design;
  if (model.work_grid.dim() > 0) j["work_grid"] = model.work_grid.dims;
  j["diagnostics"] = {{"converged", model.diagnostics.converged},
                      {"iterations", model.diagnostics.iterations},
                      {"kkt_residual", model.diagnostics.kkt_residual},
                      {"objective", model.diagnostics.objective}};
  return j.dump(2) + "\n";
}

void write_model_json(std::ostream& out, const FittedModel& model) {
  out << model_to_json(model);
}

void write_model_json_file(const std::string& path, const FittedModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_model_json(out, model);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

FittedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("model json: ") + e.what());
  }
  try {
    FittedModel model;
    model.kind = kind_from_string(j.at("kind").get<std::string>());
    const int d = j.at("d").get<int>();
    std::vector<Point> anchors;
    for (const auto& a : j.at("anchors")) anchors.push_back(a.get<Point>());
    const auto coeffs = j.at("coefficients").get<std::vector<double>>();
    Eigen::VectorXd c(static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      c[static_cast<Eigen::Index>(i)] = coeffs[i];
    model.fn = RectPiecewiseFn(d, std::move(anchors), std::move(c));
    if (j.contains("V")) {
      model.budget = j.at("V").get<double>();
      if (!(model.budget >= 0.0))
        throw std::runtime_error("model json: V must be >= 0");
    } else {
      model.budget = std::numeric_limits<double>::infinity();
    }
    model.lattice_design = j.value("lattice_design", false);
    model.params =
        static_cast<Eigen::Index>(j.value("p", static_cast<std::int64_t>(0)));
    if (j.contains("work_grid"))
      model.work_grid = LatticeGrid(j.at("work_grid").get<std::vector<int>>());
    if (j.contains("diagnostics")) {
      const json& dg = j.at("diagnostics");
      model.diagnostics.converged = dg.value("converged", false);
      model.diagnostics.iterations = dg.value("iterations", 0);
      model.diagnostics.kkt_residual = dg.value("kkt_residual", 0.0);
      model.diagnostics.objective = dg.value("objective", 0.0);
    }
    return model;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("model json: ") + e.what());
  }
}

FittedModel read_model_json(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

FittedModel read_model_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_model_json(in);
}

}  // namespace hkreg
