#ifndef BRA_DATASET_HPP
#define BRA_DATASET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace bra {

enum class ItemKind { Continuous, Binary };

struct Item {
  std::string name;
  ItemKind kind;
};

// Ordered item list plus treatment-group labels. Continuous items come first;
// this canonical column order is enforced at construction.
class OutcomeSchema {
 public:
  OutcomeSchema(std::vector<Item> items, std::vector<std::string> group_labels);

  int p() const { return static_cast<int>(items_.size()); }
  int p_continuous() const { return p_c_; }
  int p_binary() const { return p() - p_c_; }
  int n_groups() const { return static_cast<int>(groups_.size()); }

  const std::vector<Item>& items() const { return items_; }
  const std::vector<std::string>& group_labels() const { return groups_; }
  const std::string& group_label(int r) const { return groups_.at(r); }

  // -1 if the label is unknown
  int group_index(const std::string& label) const;

 private:
  std::vector<Item> items_;
  std::vector<std::string> groups_;
  int p_c_ = 0;
};

struct Row {
  std::string subject_id;
  int group = 0;          // index into schema group labels
  Eigen::VectorXd y;      // length p, schema column order
};

class Dataset {
 public:
  Dataset(OutcomeSchema schema, std::vector<Row> rows);

  const OutcomeSchema& schema() const { return schema_; }
  int n() const { return static_cast<int>(rows_.size()); }
  const Row& row(int i) const { return rows_.at(i); }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<int>& group_counts() const { return n_r_; }

  Eigen::VectorXd continuous_part(int i) const;  // first p_c entries of row i
  Eigen::VectorXd binary_part(int i) const;      // last p_b entries of row i

  Dataset subset(const std::vector<int>& indices) const;

 private:
  OutcomeSchema schema_;
  std::vector<Row> rows_;
  std::vector<int> n_r_;
};

struct SequentialSchedule {
  std::vector<int> order;           // permutation of row indices
  std::vector<int> assigned_group;  // group index at each position
};

struct Fold {
  Dataset train;
  Dataset test;
  std::vector<int> test_indices;
};

// Header-labelled delimiter-separated text, one subject per row:
// subject_id,group,<item columns in schema order>.
Dataset load_dataset(const std::string& path, const OutcomeSchema& schema);
void write_dataset(const Dataset& d, const std::string& path);

// Shuffle within group, then emit cycling through groups in schema order;
// exhausted groups are skipped.
SequentialSchedule interleave_groups(const Dataset& d, std::uint64_t seed);

// Group-stratified k-fold partition.
std::vector<Fold> split_folds(const Dataset& d, int k, std::uint64_t seed);

}  // namespace bra

#endif
