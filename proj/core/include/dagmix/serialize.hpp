#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dagmix/causal.hpp"
#include "dagmix/em.hpp"
#include "dagmix/inference.hpp"
#include "dagmix/model.hpp"

namespace dagmix {

std::string fit_result_to_json(const ModelSpec& model, const FitResult& result);
std::string fit_result_to_csv(const ModelSpec& model, const FitResult& result);
std::string fit_result_to_text(const ModelSpec& model, const FitResult& result);

// Coefficients from a FitResult document or a {"beta": [...]} / {"estimates":
// [{"label", "estimate"}]} document. Throws ArgumentError on a length or
// label mismatch.
ParamVector parameters_from_json(const ModelSpec& model, std::string_view json_text);
std::string parameters_to_json(const ModelSpec& model, const ParamVector& beta);

std::string identifiability_to_json(const IdentifiabilityReport& report);
std::string identifiability_to_text(const IdentifiabilityReport& report);

struct EffectRow {
  std::string label;
  std::vector<int> thresholds;
  std::vector<double> ratios;
};

std::string effects_to_json(const ModelSpec& model, const std::vector<EffectQuery>& queries,
                            const std::vector<EffectRow>& rows);
// Rows are transitions, columns are thresholds, four decimals.
std::string effects_to_text(const ModelSpec& model, const std::vector<EffectQuery>& queries,
                            const std::vector<EffectRow>& rows);
std::string effects_to_csv(const std::vector<EffectRow>& rows);

// Columns: index, name, number of categories, logit, parents.
std::string describe_text(const ModelSpec& model);
std::string describe_json(const ModelSpec& model);

}  // namespace dagmix
