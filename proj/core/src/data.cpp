#include "dagmix/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dagmix {

double Dataset::total_weight() const {
  double total = 0.0;
  for (const auto& r : records) total += r.weight;
  return total;
}

Dataset Dataset::grouped() const {
  Dataset out{observed_nodes, covariate_names, {}};
  std::map<std::pair<std::vector<int>, std::vector<double>>, std::size_t> where;
  for (const auto& r : records) {
    auto key = std::make_pair(r.categories, r.covariates);
    auto it = where.find(key);
    if (it == where.end()) {
      where.emplace(std::move(key), out.records.size());
      out.records.push_back(r);
    } else {
      out.records[it->second].weight += r.weight;
    }
  }
  return out;
}

Dataset Dataset::ungrouped() const {
  Dataset out{observed_nodes, covariate_names, {}};
  for (const auto& r : records) {
    if (r.weight < 0 || std::floor(r.weight) != r.weight)
      throw DataError("cannot ungroup a record with non-integer weight " + std::to_string(r.weight));
    for (long k = 0; k < static_cast<long>(r.weight); ++k) {
      Record unit = r;
      unit.weight = 1.0;
      out.records.push_back(std::move(unit));
    }
  }
  return out;
}

Dataset make_dataset(const ModelSpec& model) {
  return Dataset{model.observed_nodes(), model.covariate_names, {}};
}

void check_compatible(const ModelSpec& model, const Dataset& data) {
  if (data.observed_nodes != model.observed_nodes())
    throw DataError("dataset columns do not match the model's observed nodes");
  if (data.covariate_names != model.covariate_names)
    throw DataError("dataset covariates do not match the model's covariates");
  for (std::size_t u = 0; u < data.records.size(); ++u) {
    const Record& r = data.records[u];
    if (r.categories.size() != data.observed_nodes.size())
      throw DataError("record " + std::to_string(u + 1) + " has the wrong number of categories");
    if (r.covariates.size() != data.covariate_names.size())
      throw DataError("record " + std::to_string(u + 1) + " has the wrong number of covariates");
    for (std::size_t k = 0; k < r.categories.size(); ++k) {
      const NodeSpec& node = model.nodes[data.observed_nodes[k]];
      if (r.categories[k] < 0 || r.categories[k] >= node.n_categories)
        throw DataError("record " + std::to_string(u + 1) + ": code " + std::to_string(r.categories[k]) +
                        " out of range for node '" + node.name + "'");
    }
    for (double x : r.covariates)
      if (!std::isfinite(x)) throw DataError("record " + std::to_string(u + 1) + ": non-finite covariate");
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
      throw DataError("record " + std::to_string(u + 1) + ": weight must be non-negative");
  }
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line) + ": column '" + column + "' is not numeric: '" + text + "'");
  }
}

}  // namespace

Dataset read_csv(const ModelSpec& model, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw DataError("data file is empty");

  Dataset data = make_dataset(model);
  enum class Role { observed, covariate, weight, ignored };
  std::vector<std::pair<Role, int>> roles;
  std::vector<bool> have_node(data.observed_nodes.size(), false);
  std::vector<bool> have_cov(data.covariate_names.size(), false);
  bool seen_weight = false;
  for (const auto& name : header) {
    if (name == "weight") {
      if (seen_weight) throw DataError("duplicate 'weight' column");
      seen_weight = true;
      roles.emplace_back(Role::weight, 0);
      continue;
    }
    if (auto node = model.find(name)) {
      if (model.nodes[*node].is_latent) {
        roles.emplace_back(Role::ignored, 0);
        continue;
      }
      const int pos = static_cast<int>(std::find(data.observed_nodes.begin(), data.observed_nodes.end(), *node) -
                                       data.observed_nodes.begin());
      if (have_node[pos]) throw DataError("duplicate column '" + name + "'");
      have_node[pos] = true;
      roles.emplace_back(Role::observed, pos);
      continue;
    }
    auto cov = std::find(data.covariate_names.begin(), data.covariate_names.end(), name);
    if (cov != data.covariate_names.end()) {
      const int pos = static_cast<int>(cov - data.covariate_names.begin());
      if (have_cov[pos]) throw DataError("duplicate column '" + name + "'");
      have_cov[pos] = true;
      roles.emplace_back(Role::covariate, pos);
      continue;
    }
    throw DataError("unknown column '" + name + "'");
  }
  for (std::size_t k = 0; k < have_node.size(); ++k)
    if (!have_node[k]) throw DataError("missing column for observed node '" + model.nodes[data.observed_nodes[k]].name + "'");
  for (std::size_t k = 0; k < have_cov.size(); ++k)
    if (!have_cov[k]) throw DataError("missing covariate column '" + data.covariate_names[k] + "'");

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    Record r;
    r.categories.assign(data.observed_nodes.size(), 0);
    r.covariates.assign(data.covariate_names.size(), 0.0);
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto [role, pos] = roles[k];
      switch (role) {
        case Role::observed: {
          const double v = parse_number(fields[k], line_no, header[k]);
          if (std::floor(v) != v) throw DataError("line " + std::to_string(line_no) + ": non-integer code in '" + header[k] + "'");
          r.categories[pos] = static_cast<int>(v);
          break;
        }
        case Role::covariate: r.covariates[pos] = parse_number(fields[k], line_no, header[k]); break;
        case Role::weight: r.weight = parse_number(fields[k], line_no, header[k]); break;
        case Role::ignored: break;
      }
    }
    data.records.push_back(std::move(r));
  }
  check_compatible(model, data);
  return data;
}

Dataset read_csv_file(const ModelSpec& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_csv(model, buf.str());
}

std::string write_csv(const ModelSpec& model, const Dataset& data) {
  std::ostringstream out;
  out.precision(17);
  const bool weighted = std::any_of(data.records.begin(), data.records.end(),
                                    [](const Record& r) { return r.weight != 1.0; });
  bool first = true;
  auto sep = [&] {
    if (!first) out << ",";
    first = false;
  };
  for (int n : data.observed_nodes) sep(), out << model.nodes[n].name;
  for (const auto& c : data.covariate_names) sep(), out << c;
  if (weighted) sep(), out << "weight";
  out << "\n";
  for (const auto& r : data.records) {
    first = true;
    for (int c : r.categories) sep(), out << c;
    for (double x : r.covariates) sep(), out << x;
    if (weighted) sep(), out << r.weight;
    out << "\n";
  }
  return out.str();
}

}  // namespace dagmix
