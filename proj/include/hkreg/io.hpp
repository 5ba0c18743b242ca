#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hkreg/estimator.hpp"
#include "hkreg/lattice.hpp"

namespace hkreg {

// Shortest decimal string that parses back to exactly the same double value.
std::string format_double(double v);

// A parsed CSV data file. The response column is optional so prediction
// inputs (points only) and training inputs share one reader.
struct DataSet {
  std::vector<Point> xs;
  Eigen::VectorXd y;  // empty when the file has no response column
  bool has_response = false;
};

// Reads a CSV whose header is x1,...,xd or x1,...,xd,y (d >= 1). Every row
// must hold exactly one finite-or-parseable decimal number per column.
// Throws std::runtime_error naming the 1-based line of the first problem.
DataSet read_csv(std::istream& in);
DataSet read_csv_file(const std::string& path);

// Writes header x1,...,xd,y and one row per design point.
void write_dataset_csv(std::ostream& out, const std::vector<Point>& xs,
                       const Eigen::VectorXd& y);

// Writes header x1,...,xd,yhat and one row per design point.
void write_predictions_csv(std::ostream& out, const std::vector<Point>& xs,
                           const Eigen::VectorXd& yhat);

// Model serialization: a JSON document carrying the estimator kind, the
// variation budget when one applies, the anchored-indicator form, and the
// solve diagnostics. Values round-trip exactly. Fitted values are not
// stored; predictions are recomputed from the anchored form.
std::string model_to_json(const FittedModel& model);
void write_model_json(std::ostream& out, const FittedModel& model);
void write_model_json_file(const std::string& path, const FittedModel& model);

// Rebuilds a model from its JSON document. The fitted-value vector comes
// back empty. Throws std::runtime_error on malformed documents.
FittedModel model_from_json(const std::string& text);
FittedModel read_model_json(std::istream& in);
FittedModel read_model_json_file(const std::string& path);

}  // namespace hkreg
