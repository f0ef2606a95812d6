#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dagmix/data.hpp"
#include "dagmix/model.hpp"

namespace testing {

using dagmix::LinkKind;
using dagmix::ModelSpec;
using dagmix::ParamVector;

dagmix::NodeSpec node(const std::string& name, int categories, LinkKind link, std::vector<int> parents = {},
                      bool latent = false);

// Binary latent U (adjacent, root) with `indicators` binary global children.
ModelSpec lca_model(int indicators, int latent_levels = 2);
// U intercept, then (intercept, slope) per indicator.
ParamVector lca_params(const ModelSpec& model, double latent_intercept, double intercept, double slope);

// X -> M -> Y, all binary: P(X=1)=0.5, P(M=1|x)=0.2/0.8, P(Y=1|m)=0.3/0.9.
ModelSpec chain_model();
ParamVector chain_params();

// X -> M -> Y plus X -> Y: P(M=1|x)=0.3/0.6, P(Y=1|x,m)=0.2/0.4/0.6/0.8.
ModelSpec mediation_model();
ParamVector mediation_params();

double logit(double p);

struct RandomModelOptions {
  int min_nodes = 1;
  int max_nodes = 5;
  int max_latent = 0;
  int max_categories = 2;
  double edge_probability = 0.5;
  std::vector<LinkKind> links{LinkKind::adjacent, LinkKind::global, LinkKind::continuation};
};

// Random recursive model: at least one observed node; latents are never the
// last node so they have a chance of observed children.
ModelSpec random_model(std::mt19937_64& rng, const RandomModelOptions& options);

// ---- Independent oracles: enumeration from the documented layout only ----

// λ for one node from its block: cumulative intercepts plus indicator slopes.
std::vector<double> oracle_logits(const ModelSpec& model, const ParamVector& beta, int node,
                                  const std::vector<int>& config);
// Closed-form reconstruction per link.
std::vector<double> oracle_probs(LinkKind link, const std::vector<double>& lam);
// P(node = config[node] | parents) with config over all nodes.
double oracle_conditional(const ModelSpec& model, const ParamVector& beta, int node, const std::vector<int>& config);

// Every configuration of all nodes, last node fastest.
std::vector<std::vector<int>> all_configs(const std::vector<int>& levels);

// Joint over all nodes by brute-force product, last node fastest.
std::vector<double> oracle_joint(const ModelSpec& model, const ParamVector& beta);

// Truncated factorization over non-intervened nodes (in model order), by
// enumeration.
std::vector<double> oracle_intervene(const ModelSpec& model, const ParamVector& beta,
                                     const std::map<int, int>& assignments);

// P(Y >= k | do(x)) by enumeration.
double oracle_survival(const ModelSpec& model, const ParamVector& beta, const std::map<int, int>& assignments,
                       int outcome, int k);

// Direct ML fit of one node's regression in a fully observed model by Newton
// iterations on the exact gradient. `rows`: full configurations with weights.
Eigen::VectorXd oracle_node_ml(const ModelSpec& model, int node,
                               const std::vector<std::pair<std::vector<int>, double>>& rows);

// Observed-data cell probabilities (latents summed out), observed nodes in
// model order, last fastest.
std::vector<double> oracle_observed(const ModelSpec& model, const ParamVector& beta);

// Draws n records from oracle_observed by inverse-CDF sampling, grouped.
dagmix::Dataset oracle_sample(const ModelSpec& model, const ParamVector& beta, int n, std::uint64_t seed);

}  // namespace testing
