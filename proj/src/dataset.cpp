#include "bra/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bra/rng.hpp"

namespace bra {

OutcomeSchema::OutcomeSchema(std::vector<Item> items, std::vector<std::string> group_labels)
    : items_(std::move(items)), groups_(std::move(group_labels)) {
  if (items_.empty()) throw std::invalid_argument("schema: at least one item required");
  if (groups_.empty()) throw std::invalid_argument("schema: at least one group required");
  bool seen_binary = false;
  for (const auto& it : items_) {
    if (it.kind == ItemKind::Binary) {
      seen_binary = true;
    } else if (seen_binary) {
      throw std::invalid_argument("schema: continuous items must precede binary items");
    }
    if (it.kind == ItemKind::Continuous) ++p_c_;
  }
  std::set<std::string> names;
  for (const auto& it : items_)
    if (!names.insert(it.name).second)
      throw std::invalid_argument("schema: duplicate item name '" + it.name + "'");
  std::set<std::string> labels;
  for (const auto& g : groups_)
    if (!labels.insert(g).second)
      throw std::invalid_argument("schema: duplicate group label '" + g + "'");
}

int OutcomeSchema::group_index(const std::string& label) const {
  for (int r = 0; r < n_groups(); ++r)
    if (groups_[r] == label) return r;
  return -1;
}

Dataset::Dataset(OutcomeSchema schema, std::vector<Row> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)), n_r_(schema_.n_groups(), 0) {
  const int p = schema_.p();
  const int p_c = schema_.p_continuous();
  for (size_t i = 0; i < rows_.size(); ++i) {
    const Row& row = rows_[i];
    if (row.group < 0 || row.group >= schema_.n_groups())
      throw std::invalid_argument("dataset: row " + std::to_string(i + 1) + " has invalid group index");
    if (row.y.size() != p)
      throw std::invalid_argument("dataset: row " + std::to_string(i + 1) + " has wrong item count");
    for (int j = 0; j < p; ++j) {
      if (!std::isfinite(row.y[j]))
        throw std::invalid_argument("dataset: non-finite value in row " + std::to_string(i + 1) +
                                    ", column '" + schema_.items()[j].name + "'");
      if (j >= p_c && row.y[j] != 0.0 && row.y[j] != 1.0)
        throw std::invalid_argument("dataset: non-binary value in row " + std::to_string(i + 1) +
                                    ", column '" + schema_.items()[j].name + "'");
    }
    ++n_r_[row.group];
  }
}

Eigen::VectorXd Dataset::continuous_part(int i) const {
  return rows_.at(i).y.head(schema_.p_continuous());
}

Eigen::VectorXd Dataset::binary_part(int i) const {
  return rows_.at(i).y.tail(schema_.p_binary());
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  std::vector<Row> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(rows_.at(i));
  return Dataset(schema_, std::move(out));
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Dataset load_dataset(const std::string& path, const OutcomeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file '" + path + "'");
  auto header = split_line(strip_cr(line), ',');
  if (header.size() != static_cast<size_t>(schema.p() + 2) || header[0] != "subject_id" || header[1] != "group")
    throw std::runtime_error("load_dataset: header must be subject_id,group,<items>");
  for (int j = 0; j < schema.p(); ++j)
    if (header[j + 2] != schema.items()[j].name)
      throw std::runtime_error("load_dataset: missing or misplaced column '" + schema.items()[j].name + "'");

  std::vector<Row> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_line(line, ',');
    if (fields.size() != header.size())
      throw std::runtime_error("load_dataset: row " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    Row row;
    row.subject_id = fields[0];
    row.group = schema.group_index(fields[1]);
    if (row.group < 0)
      throw std::runtime_error("load_dataset: unknown group label '" + fields[1] + "' in row " +
                               std::to_string(line_no));
    row.y.resize(schema.p());
    for (int j = 0; j < schema.p(); ++j) {
      const std::string& f = fields[j + 2];
      size_t pos = 0;
      double v;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw std::runtime_error("load_dataset: bad number '" + f + "' in row " + std::to_string(line_no) +
                                 ", column '" + schema.items()[j].name + "'");
      }
      if (pos != f.size())
        throw std::runtime_error("load_dataset: bad number '" + f + "' in row " + std::to_string(line_no) +
                                 ", column '" + schema.items()[j].name + "'");
      if (schema.items()[j].kind == ItemKind::Binary && v != 0.0 && v != 1.0)
        throw std::runtime_error("load_dataset: non-binary value '" + f + "' in row " +
                                 std::to_string(line_no) + ", column '" + schema.items()[j].name + "'");
      row.y[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_dataset: empty file '" + path + "'");
  return Dataset(schema, std::move(rows));
}

void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open '" + path + "'");
  const auto& schema = d.schema();
  out << "subject_id,group";
  for (const auto& it : schema.items()) out << ',' << it.name;
  out << '\n';
  char buf[64];
  for (const auto& row : d.rows()) {
    out << row.subject_id << ',' << schema.group_label(row.group);
    for (int j = 0; j < schema.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.y[j]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_dataset: write failed for '" + path + "'");
}

SequentialSchedule interleave_groups(const Dataset& d, std::uint64_t seed) {
  const int R = d.schema().n_groups();
  for (int r = 0; r < R; ++r)
    if (d.group_counts()[r] == 0)
      throw std::invalid_argument("interleave_groups: group '" + d.schema().group_label(r) + "' is empty");

  std::vector<std::vector<int>> by_group(R);
  for (int i = 0; i < d.n(); ++i) by_group[d.row(i).group].push_back(i);
  for (int r = 0; r < R; ++r) {
    RngStream rng(seed, {0xF15Eu, static_cast<std::uint64_t>(r)});
    std::shuffle(by_group[r].begin(), by_group[r].end(), rng.engine());
  }

  SequentialSchedule sched;
  sched.order.reserve(d.n());
  sched.assigned_group.reserve(d.n());
  std::vector<size_t> cursor(R, 0);
  while (static_cast<int>(sched.order.size()) < d.n()) {
    for (int r = 0; r < R; ++r) {
      if (cursor[r] < by_group[r].size()) {
        sched.order.push_back(by_group[r][cursor[r]++]);
        sched.assigned_group.push_back(r);
      }
    }
  }
  return sched;
}

std::vector<Fold> split_folds(const Dataset& d, int k, std::uint64_t seed) {
  if (k < 2 || k > d.n()) throw std::invalid_argument("split_folds: k must be in [2, n]");
  const int R = d.schema().n_groups();

  std::vector<std::vector<int>> by_group(R);
  for (int i = 0; i < d.n(); ++i) by_group[d.row(i).group].push_back(i);

  // deal shuffled rows round-robin to folds, carrying the cursor across
  // groups: per-group and total fold sizes both stay within one subject
  std::vector<std::vector<int>> test_idx(k);
  int cursor = 0;
  for (int r = 0; r < R; ++r) {
    RngStream rng(seed, {0xF07Du, static_cast<std::uint64_t>(r)});
    std::shuffle(by_group[r].begin(), by_group[r].end(), rng.engine());
    for (int i : by_group[r]) {
      test_idx[cursor].push_back(i);
      cursor = (cursor + 1) % k;
    }
  }

  std::vector<Fold> folds;
  folds.reserve(k);
  for (int f = 0; f < k; ++f) {
    std::sort(test_idx[f].begin(), test_idx[f].end());
    std::vector<int> train_idx;
    train_idx.reserve(d.n() - test_idx[f].size());
    size_t t = 0;
    for (int i = 0; i < d.n(); ++i) {
      if (t < test_idx[f].size() && test_idx[f][t] == i) {
        ++t;
      } else {
        train_idx.push_back(i);
      }
    }
    folds.push_back(Fold{d.subset(train_idx), d.subset(test_idx[f]), test_idx[f]});
  }
  return folds;
}

}  // namespace bra
