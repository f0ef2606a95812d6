#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace dagmix {

// Number of cells of a table with the given per-variable levels.
std::size_t cell_count(std::span<const int> levels);

// Mixed-radix strides with the last variable running fastest.
std::vector<std::size_t> lex_strides(std::span<const int> levels);

// Flat position of `cell`; throws std::out_of_range on a bad coordinate.
std::size_t lex_index(std::span<const int> levels, std::span<const int> cell);
std::vector<int> lex_decode(std::span<const int> levels, std::size_t index);

// Dense array over an ordered subset of variables (node positions), stored in
// lexicographic order: categories of later-listed variables run fastest.
class LexTable {
 public:
  LexTable() = default;
  LexTable(std::vector<int> vars, std::vector<int> levels, std::vector<double> values);
  static LexTable filled(std::vector<int> vars, std::vector<int> levels, double value);

  const std::vector<int>& vars() const { return vars_; }
  const std::vector<int>& levels() const { return levels_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::span<const int> cell) const { return values_[lex_index(levels_, cell)]; }

  // Position of a variable in vars(), or -1.
  int position(int var) const;
  int level_of(int var) const;
  double total() const;

  bool operator==(const LexTable&) const = default;

 private:
  std::vector<int> vars_;
  std::vector<int> levels_;
  std::vector<double> values_;
};

// Gather map between two shapes: target cell k takes source cell index[k].
// A reorder map is a permutation; an expand map replicates source cells over
// the variables the source lacks.
struct IndexMap {
  enum class Kind { reorder, expand, select };
  Kind kind = Kind::reorder;
  std::vector<int> from_vars, from_levels;
  std::vector<int> to_vars, to_levels;
  std::vector<std::size_t> index;

  std::vector<double> apply(std::span<const double> source) const;
  // Sums target-shaped values back onto the source shape (marginalization
  // through an expand map), with compensated summation per source cell.
  std::vector<double> scatter_add(std::span<const double> target) const;
  // Left inverse: inverse().apply(apply(v)) == v. Reorder maps invert to the
  // inverse permutation; expand maps to a selection of one replicate per cell.
  IndexMap inverse() const;
};

// `to_vars` must be a permutation of `from_vars` or a superset of them;
// `to_levels` gives the level of each target variable. Throws ArgumentError.
IndexMap build_index_map(std::span<const int> from_vars, std::span<const int> to_vars,
                         std::span<const int> to_levels);

// Maps memoized for the lifetime of a fit, keyed by (from, to, levels).
class IndexMapCache {
 public:
  const IndexMap& get(const std::vector<int>& from_vars, const std::vector<int>& to_vars,
                      const std::vector<int>& to_levels);
  std::size_t size() const { return maps_.size(); }

 private:
  std::map<std::tuple<std::vector<int>, std::vector<int>, std::vector<int>>, IndexMap> maps_;
};

// Sums out every variable not in `keep`. Result variables keep their original
// relative order. Throws ArgumentError if `keep` names an unknown variable.
LexTable marginalize(const LexTable& t, std::span<const int> keep);
LexTable marginalize(const LexTable& t, const IndexMap& expand_map);

// Replicates `t` over `target_vars`; each target cell takes the value at its
// projection onto t.vars().
LexTable expand(const LexTable& t, std::span<const int> target_vars,
                std::span<const int> target_levels);
LexTable expand(const LexTable& t, const IndexMap& expand_map);

LexTable reorder(const LexTable& t, std::span<const int> new_order);

// acc *= factor, cellwise after projecting acc cells onto factor.vars().
void multiply_into(LexTable& acc, const LexTable& factor);

// Fixes the listed variables at the given categories and drops them.
LexTable slice(const LexTable& t, std::span<const std::pair<int, int>> fixed);

// Header with one column per variable (named v<variable id>) and a value column.
std::string to_csv(const LexTable& t);

// Neumaier compensated summation.
double compensated_sum(std::span<const double> values);

}  // namespace dagmix
