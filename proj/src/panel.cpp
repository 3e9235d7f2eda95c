#include "pfcast/panel.hpp"

#include <algorithm>
#include <tuple>

#include "pfcast/error.hpp"

namespace pfcast {

int CatalogTables::category_of(int item_id) const {
  auto it = item_category.find(item_id);
  if (it == item_category.end()) {
    throw ValidationError("item " + std::to_string(item_id) + " has no category in the catalog");
  }
  return it->second;
}

namespace {

auto cell_key(const PanelCell& c) { return std::tie(c.date_block, c.shop_id, c.item_id); }

}  // namespace

PanelGrid::PanelGrid(std::vector<PanelCell> cells) : cells_(std::move(cells)) {
  std::sort(cells_.begin(), cells_.end(),
            [](const PanelCell& a, const PanelCell& b) { return cell_key(a) < cell_key(b); });
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].date_block < 0) throw ValidationError("panel cell with negative date_block");
    if (i > 0 && cell_key(cells_[i - 1]) == cell_key(cells_[i])) {
      const auto& c = cells_[i];
      throw ValidationError("duplicate panel cell (" + std::to_string(c.date_block) + "," +
                            std::to_string(c.shop_id) + "," + std::to_string(c.item_id) + ")");
    }
  }
  if (cells_.empty()) return;
  min_block_ = cells_.front().date_block;
  max_block_ = cells_.back().date_block;
  const auto n_blocks = static_cast<std::size_t>(max_block_ - min_block_ + 1);
  block_start_.assign(n_blocks + 1, cells_.size());
  for (std::size_t i = cells_.size(); i-- > 0;) {
    block_start_[static_cast<std::size_t>(cells_[i].date_block - min_block_)] = i;
  }
  // Empty blocks start where the next non-empty block starts.
  for (std::size_t b = n_blocks; b-- > 0;) {
    block_start_[b] = std::min(block_start_[b], block_start_[b + 1]);
  }
}

std::span<const PanelCell> PanelGrid::block(int date_block) const {
  if (cells_.empty() || date_block < min_block_ || date_block > max_block_) return {};
  const auto b = static_cast<std::size_t>(date_block - min_block_);
  return std::span<const PanelCell>(cells_).subspan(block_start_[b], block_start_[b + 1] - block_start_[b]);
}

const PanelCell* PanelGrid::find(int date_block, int shop_id, int item_id) const {
  auto cells = block(date_block);
  auto it = std::lower_bound(cells.begin(), cells.end(), std::pair{shop_id, item_id},
                             [](const PanelCell& c, const std::pair<int, int>& k) {
                               return std::pair{c.shop_id, c.item_id} < k;
                             });
  if (it == cells.end() || it->shop_id != shop_id || it->item_id != item_id) return nullptr;
  return &*it;
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> names, std::vector<std::vector<double>> columns,
                             std::vector<double> target, std::vector<int> date_block,
                             std::vector<RowKey> row_keys)
    : names_(std::move(names)),
      columns_(std::move(columns)),
      target_(std::move(target)),
      date_block_(std::move(date_block)),
      row_keys_(std::move(row_keys)) {
  if (names_.size() != columns_.size()) throw ValidationError("feature name count does not match column count");
  const std::size_t n = target_.size();
  if (date_block_.size() != n || row_keys_.size() != n) {
    throw ValidationError("target, date_block and row_keys lengths differ");
  }
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (columns_[j].size() != n) throw ValidationError("column '" + names_[j] + "' has wrong length");
    if (!index_.emplace(names_[j], j).second) throw ValidationError("duplicate feature name '" + names_[j] + "'");
  }
}

std::optional<std::size_t> FeatureMatrix::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::vector<double>> cols(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    cols[j].reserve(rows.size());
    for (auto r : rows) cols[j].push_back(columns_[j][r]);
  }
  std::vector<double> t;
  std::vector<int> b;
  std::vector<RowKey> k;
  t.reserve(rows.size());
  b.reserve(rows.size());
  k.reserve(rows.size());
  for (auto r : rows) {
    t.push_back(target_[r]);
    b.push_back(date_block_[r]);
    k.push_back(row_keys_[r]);
  }
  return FeatureMatrix(names_, std::move(cols), std::move(t), std::move(b), std::move(k));
}

FeatureMatrix FeatureMatrix::with_target(std::vector<double> target) const {
  return FeatureMatrix(names_, columns_, std::move(target), date_block_, row_keys_);
}

SequenceSet SequenceSet::select_rows(std::span<const std::size_t> rows) const {
  SequenceSet out;
  out.window = window;
  out.dynamic_names = dynamic_names;
  out.static_names = static_names;
  for (auto r : rows) {
    auto d = dynamic_of(r);
    out.dynamic.insert(out.dynamic.end(), d.begin(), d.end());
    auto s = static_of(r);
    out.statics.insert(out.statics.end(), s.begin(), s.end());
    out.target.push_back(target[r]);
    out.date_block.push_back(date_block[r]);
    out.row_keys.push_back(row_keys[r]);
  }
  return out;
}

void SplitSpec::validate() const {
  if (train_first < 0 || train_first > train_last) throw ValidationError("split: empty or negative training block range");
  if (validation_block <= train_last) throw ValidationError("split: validation_block must follow every training block");
  if (test_block <= validation_block) throw ValidationError("split: test_block must follow validation_block");
}

Partitioned<std::vector<std::size_t>> partition_rows(std::span<const int> date_block, const SplitSpec& split) {
  split.validate();
  Partitioned<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < date_block.size(); ++i) {
    const int b = date_block[i];
    if (b >= split.train_first && b <= split.train_last) {
      out.train.push_back(i);
    } else if (b == split.validation_block) {
      out.validation.push_back(i);
    } else if (b == split.test_block) {
      out.test.push_back(i);
    }
  }
  if (out.train.empty()) throw ValidationError("empty partition: no training rows");
  if (out.validation.empty()) throw ValidationError("empty partition: no rows in validation block");
  if (out.test.empty()) throw ValidationError("empty partition: no rows in test block");
  return out;
}

Partitioned<FeatureMatrix> split_rows(const FeatureMatrix& m, const SplitSpec& split) {
  auto idx = partition_rows(m.date_block(), split);
  return {m.select_rows(idx.train), m.select_rows(idx.validation), m.select_rows(idx.test)};
}

Partitioned<SequenceSet> split_rows(const SequenceSet& s, const SplitSpec& split) {
  auto idx = partition_rows(s.date_block, split);
  return {s.select_rows(idx.train), s.select_rows(idx.validation), s.select_rows(idx.test)};
}

double clip_target(double x, double lo, double hi) noexcept { return std::min(hi, std::max(lo, x)); }

}  // namespace pfcast
