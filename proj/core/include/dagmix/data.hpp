#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dagmix/model.hpp"

namespace dagmix {

struct Record {
  std::vector<int> categories;    // one code per observed node, model order
  std::vector<double> covariates; // one value per ModelSpec::covariate_names
  double weight = 1.0;

  bool operator==(const Record&) const = default;
};

// Categorical observations on the observed nodes of a model. A record with
// weight w stands for w identical units; grouped and unit-level forms give the
// same likelihood.
struct Dataset {
  std::vector<int> observed_nodes;
  std::vector<std::string> covariate_names;
  std::vector<Record> records;

  double total_weight() const;
  std::size_t size() const { return records.size(); }

  // Merges identical (categories, covariates) records, summing weights, in
  // order of first appearance.
  Dataset grouped() const;
  // Expands integer weights into unit records; throws DataError otherwise.
  Dataset ungrouped() const;
};

Dataset make_dataset(const ModelSpec& model);

// Throws DataError describing the first incompatibility.
void check_compatible(const ModelSpec& model, const Dataset& data);

// CSV with a header: one column per observed node (integer codes), optional
// covariate columns, optional `weight`. Columns named after latent nodes are
// ignored; any other unknown column is an error.
Dataset read_csv(const ModelSpec& model, std::string_view text);
Dataset read_csv_file(const ModelSpec& model, const std::string& path);

// Emits observed columns, covariates, and `weight` when any weight differs
// from 1.
std::string write_csv(const ModelSpec& model, const Dataset& data);

}  // namespace dagmix
