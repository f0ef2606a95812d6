#include "dagmix/table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dagmix/error.hpp"

namespace dagmix {

std::size_t cell_count(std::span<const int> levels) {
  std::size_t n = 1;
  for (int l : levels) n *= static_cast<std::size_t>(l);
  return n;
}

std::vector<std::size_t> lex_strides(std::span<const int> levels) {
  std::vector<std::size_t> strides(levels.size());
  std::size_t s = 1;
  for (std::size_t k = levels.size(); k-- > 0;) {
    strides[k] = s;
    s *= static_cast<std::size_t>(levels[k]);
  }
  return strides;
}

std::size_t lex_index(std::span<const int> levels, std::span<const int> cell) {
  if (levels.size() != cell.size()) throw std::out_of_range("cell has wrong number of coordinates");
  std::size_t index = 0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (cell[k] < 0 || cell[k] >= levels[k])
      throw std::out_of_range("coordinate " + std::to_string(k) + " = " + std::to_string(cell[k]) +
                              " outside [0, " + std::to_string(levels[k]) + ")");
    index = index * static_cast<std::size_t>(levels[k]) + static_cast<std::size_t>(cell[k]);
  }
  return index;
}

std::vector<int> lex_decode(std::span<const int> levels, std::size_t index) {
  std::vector<int> cell(levels.size());
  for (std::size_t k = levels.size(); k-- > 0;) {
    cell[k] = static_cast<int>(index % static_cast<std::size_t>(levels[k]));
    index /= static_cast<std::size_t>(levels[k]);
  }
  return cell;
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

LexTable::LexTable(std::vector<int> vars, std::vector<int> levels, std::vector<double> values)
    : vars_(std::move(vars)), levels_(std::move(levels)), values_(std::move(values)) {
  if (vars_.size() != levels_.size()) throw ArgumentError("table vars and levels differ in length");
  for (int l : levels_)
    if (l < 1) throw ArgumentError("table level must be positive");
  if (values_.size() != cell_count(levels_))
    throw ArgumentError("table has " + std::to_string(values_.size()) + " values, shape needs " +
                        std::to_string(cell_count(levels_)));
  std::vector<int> sorted = vars_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ArgumentError("table lists a variable twice");
}

LexTable LexTable::filled(std::vector<int> vars, std::vector<int> levels, double value) {
  const std::size_t n = cell_count(levels);
  return LexTable(std::move(vars), std::move(levels), std::vector<double>(n, value));
}

int LexTable::position(int var) const {
  auto it = std::find(vars_.begin(), vars_.end(), var);
  return it == vars_.end() ? -1 : static_cast<int>(it - vars_.begin());
}

int LexTable::level_of(int var) const {
  const int p = position(var);
  if (p < 0) throw ArgumentError("variable " + std::to_string(var) + " not in table");
  return levels_[p];
}

double LexTable::total() const { return compensated_sum(values_); }

std::vector<double> IndexMap::apply(std::span<const double> source) const {
  if (source.size() != cell_count(from_levels)) throw ArgumentError("index map applied to wrong-size input");
  std::vector<double> out(index.size());
  for (std::size_t k = 0; k < index.size(); ++k) out[k] = source[index[k]];
  return out;
}

std::vector<double> IndexMap::scatter_add(std::span<const double> target) const {
  if (target.size() != index.size()) throw ArgumentError("scatter_add input does not match map target");
  const std::size_t n = cell_count(from_levels);
  std::vector<double> sum(n, 0.0), comp(n, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    const std::size_t s = index[k];
    const double v = target[k];
    const double t = sum[s] + v;
    if (std::abs(sum[s]) >= std::abs(v)) comp[s] += (sum[s] - t) + v;
    else comp[s] += (v - t) + sum[s];
    sum[s] = t;
  }
  for (std::size_t s = 0; s < n; ++s) sum[s] += comp[s];
  return sum;
}

IndexMap IndexMap::inverse() const {
  IndexMap inv;
  inv.from_vars = to_vars;
  inv.from_levels = to_levels;
  inv.to_vars = from_vars;
  inv.to_levels = from_levels;
  const std::size_t n = cell_count(from_levels);
  inv.index.assign(n, 0);
  if (kind == Kind::reorder) {
    inv.kind = Kind::reorder;
    for (std::size_t k = 0; k < index.size(); ++k) inv.index[index[k]] = k;
    return inv;
  }
  if (kind != Kind::expand) throw ArgumentError("only reorder and expand maps are invertible");
  inv.kind = Kind::select;
  std::vector<bool> seen(n, false);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (!seen[index[k]]) {
      inv.index[index[k]] = k;
      seen[index[k]] = true;
    }
  }
  return inv;
}

IndexMap build_index_map(std::span<const int> from_vars, std::span<const int> to_vars,
                         std::span<const int> to_levels) {
  if (to_vars.size() != to_levels.size()) throw ArgumentError("target vars and levels differ in length");
  IndexMap map;
  map.to_vars.assign(to_vars.begin(), to_vars.end());
  map.to_levels.assign(to_levels.begin(), to_levels.end());
  map.from_vars.assign(from_vars.begin(), from_vars.end());

  // Position of every source variable in the target.
  std::vector<int> where(from_vars.size());
  for (std::size_t k = 0; k < from_vars.size(); ++k) {
    auto it = std::find(to_vars.begin(), to_vars.end(), from_vars[k]);
    if (it == to_vars.end())
      throw ArgumentError("incompatible variable sets: " + std::to_string(from_vars[k]) +
                          " missing from target");
    where[k] = static_cast<int>(it - to_vars.begin());
    map.from_levels.push_back(to_levels[where[k]]);
  }
  {
    std::vector<int> sorted(from_vars.begin(), from_vars.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ArgumentError("incompatible variable sets: duplicated source variable");
  }
  map.kind = from_vars.size() == to_vars.size() ? IndexMap::Kind::reorder : IndexMap::Kind::expand;

  // Stride, in the source table, of each target variable (0 if absent).
  const auto src_strides = lex_strides(map.from_levels);
  std::vector<std::size_t> stride_of_target(to_vars.size(), 0);
  for (std::size_t k = 0; k < from_vars.size(); ++k) stride_of_target[where[k]] = src_strides[k];

  const std::size_t n = cell_count(to_levels);
  map.index.resize(n);
  std::vector<int> cell(to_vars.size(), 0);
  std::size_t src = 0;
  for (std::size_t k = 0; k < n; ++k) {
    map.index[k] = src;
    // Odometer increment, last variable fastest.
    for (std::size_t d = to_vars.size(); d-- > 0;) {
      src += stride_of_target[d];
      if (++cell[d] < to_levels[d]) break;
      src -= stride_of_target[d] * static_cast<std::size_t>(to_levels[d]);
      cell[d] = 0;
    }
  }
  return map;
}

const IndexMap& IndexMapCache::get(const std::vector<int>& from_vars, const std::vector<int>& to_vars,
                                   const std::vector<int>& to_levels) {
  auto key = std::make_tuple(from_vars, to_vars, to_levels);
  auto it = maps_.find(key);
  if (it == maps_.end()) it = maps_.emplace(std::move(key), build_index_map(from_vars, to_vars, to_levels)).first;
  return it->second;
}

LexTable marginalize(const LexTable& t, std::span<const int> keep) {
  std::vector<int> kept;
  for (int v : keep)
    if (t.position(v) < 0) throw ArgumentError("cannot keep variable " + std::to_string(v) + ": not in table");
  for (int v : t.vars())
    if (std::find(keep.begin(), keep.end(), v) != keep.end()) kept.push_back(v);
  return marginalize(t, build_index_map(kept, t.vars(), t.levels()));
}

LexTable marginalize(const LexTable& t, const IndexMap& expand_map) {
  if (expand_map.to_vars != t.vars() || expand_map.to_levels != t.levels())
    throw ArgumentError("marginalization map does not match the table");
  return LexTable(expand_map.from_vars, expand_map.from_levels, expand_map.scatter_add(t.values()));
}

LexTable expand(const LexTable& t, std::span<const int> target_vars, std::span<const int> target_levels) {
  for (std::size_t k = 0; k < t.vars().size(); ++k) {
    auto it = std::find(target_vars.begin(), target_vars.end(), t.vars()[k]);
    if (it == target_vars.end()) throw ArgumentError("expand target lacks a source variable");
    if (target_levels[it - target_vars.begin()] != t.levels()[k])
      throw ArgumentError("inconsistent levels for variable " + std::to_string(t.vars()[k]));
  }
  return expand(t, build_index_map(t.vars(), target_vars, target_levels));
}

LexTable expand(const LexTable& t, const IndexMap& expand_map) {
  if (expand_map.from_vars != t.vars() || expand_map.from_levels != t.levels())
    throw ArgumentError("expansion map does not match the table");
  return LexTable(expand_map.to_vars, expand_map.to_levels, expand_map.apply(t.values()));
}

LexTable reorder(const LexTable& t, std::span<const int> new_order) {
  if (new_order.size() != t.vars().size()) throw ArgumentError("reorder needs a permutation of the table vars");
  std::vector<int> levels;
  for (int v : new_order) levels.push_back(t.level_of(v));
  return expand(t, build_index_map(t.vars(), new_order, levels));
}

void multiply_into(LexTable& acc, const LexTable& factor) {
  std::vector<int> sub;
  for (int v : factor.vars()) {
    if (acc.position(v) < 0) throw ArgumentError("factor variable missing from accumulator");
    if (acc.level_of(v) != factor.level_of(v)) throw ArgumentError("inconsistent levels in multiply");
  }
  const IndexMap map = build_index_map(factor.vars(), acc.vars(), acc.levels());
  auto values = acc.values();
  for (std::size_t k = 0; k < values.size(); ++k) values[k] *= factor[map.index[k]];
}

LexTable slice(const LexTable& t, std::span<const std::pair<int, int>> fixed) {
  std::vector<int> keep_vars, keep_levels;
  std::size_t base = 0;
  const auto strides = lex_strides(t.levels());
  std::vector<bool> is_fixed(t.vars().size(), false);
  for (const auto& [var, level] : fixed) {
    const int p = t.position(var);
    if (p < 0) continue;
    if (level < 0 || level >= t.levels()[p]) throw ArgumentError("slice level out of range");
    base += strides[p] * static_cast<std::size_t>(level);
    is_fixed[p] = true;
  }
  std::vector<std::size_t> keep_strides;
  for (std::size_t k = 0; k < t.vars().size(); ++k) {
    if (is_fixed[k]) continue;
    keep_vars.push_back(t.vars()[k]);
    keep_levels.push_back(t.levels()[k]);
    keep_strides.push_back(strides[k]);
  }
  const std::size_t n = cell_count(keep_levels);
  std::vector<double> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto cell = lex_decode(keep_levels, k);
    std::size_t src = base;
    for (std::size_t d = 0; d < cell.size(); ++d) src += keep_strides[d] * static_cast<std::size_t>(cell[d]);
    values[k] = t[src];
  }
  return LexTable(std::move(keep_vars), std::move(keep_levels), std::move(values));
}

std::string to_csv(const LexTable& t) {
  std::ostringstream out;
  out.precision(17);
  for (int v : t.vars()) out << "v" << v << ",";
  out << "value\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    for (int c : lex_decode(t.levels(), k)) out << c << ",";
    out << t[k] << "\n";
  }
  return out.str();
}

}  // namespace dagmix
