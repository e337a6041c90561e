#include "athena/rules.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "athena/errors.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

// ---------------------------------------------------------------------------
// Integer-item view of the transactions, shared by mining and closure code.

struct ItemDict {
  std::vector<StateItem> items;
  std::map<StateItem, int> index;

  int intern(const StateItem& item) {
    auto [it, inserted] =
        index.try_emplace(item, static_cast<int>(items.size()));
    if (inserted) items.push_back(item);
    return it->second;
  }
  int find(const StateItem& item) const {
    auto it = index.find(item);
    return it == index.end() ? -1 : it->second;
  }
};

struct IndexedTransactions {
  ItemDict dict;
  std::vector<std::vector<int>> rows;  // item ids per transaction
};

IndexedTransactions index_transactions(std::span<const Transaction> txns) {
  IndexedTransactions out;
  out.rows.reserve(txns.size());
  for (const Transaction& t : txns) {
    std::vector<int> row;
    row.reserve(t.items.size());
    for (const StateItem& item : t.items) row.push_back(out.dict.intern(item));
    out.rows.push_back(std::move(row));
  }
  return out;
}

// Transaction-id bitsets, one per item.
struct TidSets {
  std::size_t n_transactions = 0;
  std::size_t words_per_item = 0;
  std::vector<std::vector<std::uint64_t>> sets;

  explicit TidSets(const IndexedTransactions& idx) {
    n_transactions = idx.rows.size();
    words_per_item = (n_transactions + 63) / 64;
    sets.assign(idx.dict.items.size(),
                std::vector<std::uint64_t>(words_per_item, 0));
    for (std::size_t t = 0; t < idx.rows.size(); ++t) {
      for (int item : idx.rows[t]) {
        sets[static_cast<std::size_t>(item)][t / 64] |= 1ull << (t % 64);
      }
    }
  }

  std::size_t count(const std::vector<std::uint64_t>& bits) const {
    std::size_t c = 0;
    for (std::uint64_t w : bits) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  // Transactions containing every item of `pattern`.
  std::vector<std::uint64_t> intersect(const std::vector<int>& pattern) const {
    std::vector<std::uint64_t> bits(words_per_item, ~0ull);
    if (words_per_item > 0 && n_transactions % 64 != 0) {
      bits.back() = (1ull << (n_transactions % 64)) - 1;
    }
    for (int item : pattern) {
      const auto& s = sets[static_cast<std::size_t>(item)];
      for (std::size_t w = 0; w < words_per_item; ++w) bits[w] &= s[w];
    }
    return bits;
  }

  // Elements of `sub` missing from item's tidset.
  std::size_t uncovered(const std::vector<std::uint64_t>& sub,
                        int item) const {
    const auto& s = sets[static_cast<std::size_t>(item)];
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_per_item; ++w) {
      c += static_cast<std::size_t>(std::popcount(sub[w] & ~s[w]));
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// FP-tree

struct FpNode {
  int item;
  std::size_t count;
  FpNode* parent;
  std::map<int, FpNode*> children;
  FpNode* next;  // header chain
};

struct FpTree {
  std::deque<FpNode> arena;
  FpNode* root;
  std::map<int, FpNode*> headers;
  std::map<int, std::size_t> item_counts;

  FpTree() { root = &arena.emplace_back(FpNode{-1, 0, nullptr, {}, nullptr}); }

  void insert(std::span<const int> ordered_items, std::size_t count) {
    FpNode* node = root;
    for (int item : ordered_items) {
      auto it = node->children.find(item);
      if (it == node->children.end()) {
        FpNode* child =
            &arena.emplace_back(FpNode{item, 0, node, {}, nullptr});
        auto [hit, inserted] = headers.try_emplace(item, child);
        if (!inserted) {
          child->next = hit->second;
          hit->second = child;
        }
        node->children.emplace(item, child);
        node = child;
      } else {
        node = it->second;
      }
      node->count += count;
      item_counts[item] += count;
    }
  }
};

using PatternSink =
    std::function<void(const std::vector<int>&, std::size_t count)>;

// Orders items by descending count, ties by ascending item id, and drops
// infrequent ones; the shared prefix structure is what compresses the tree.
std::vector<int> order_for_tree(std::span<const int> row,
                                const std::map<int, std::size_t>& counts,
                                std::size_t min_count) {
  std::vector<int> kept;
  for (int item : row) {
    auto it = counts.find(item);
    if (it != counts.end() && it->second >= min_count) kept.push_back(item);
  }
  std::sort(kept.begin(), kept.end(), [&](int a, int b) {
    const std::size_t ca = counts.at(a), cb = counts.at(b);
    if (ca != cb) return ca > cb;
    return a < b;
  });
  return kept;
}

void mine_tree(const FpTree& tree, std::size_t min_count,
               std::size_t max_size, std::vector<int>& suffix,
               const PatternSink& emit) {
  // Least frequent first so each extension's conditional tree is small.
  std::vector<int> items;
  for (const auto& [item, count] : tree.item_counts) {
    if (count >= min_count) items.push_back(item);
  }
  std::sort(items.begin(), items.end(), [&](int a, int b) {
    const std::size_t ca = tree.item_counts.at(a), cb = tree.item_counts.at(b);
    if (ca != cb) return ca < cb;
    return a > b;
  });

  for (int item : items) {
    suffix.push_back(item);
    emit(suffix, tree.item_counts.at(item));

    if (max_size == 0 || suffix.size() < max_size) {
      // Conditional pattern base for `item`.
      std::vector<std::pair<std::vector<int>, std::size_t>> base;
      std::map<int, std::size_t> base_counts;
      for (FpNode* node = tree.headers.at(item); node; node = node->next) {
        std::vector<int> path;
        for (FpNode* up = node->parent; up && up->item >= 0;
             up = up->parent) {
          path.push_back(up->item);
        }
        std::reverse(path.begin(), path.end());
        for (int p : path) base_counts[p] += node->count;
        if (!path.empty()) base.emplace_back(std::move(path), node->count);
      }

      bool any_frequent = false;
      for (const auto& [it2, c] : base_counts) {
        (void)it2;
        if (c >= min_count) {
          any_frequent = true;
          break;
        }
      }
      if (any_frequent) {
        FpTree cond;
        for (const auto& [path, count] : base) {
          const std::vector<int> ordered =
              order_for_tree(path, base_counts, min_count);
          if (!ordered.empty()) cond.insert(ordered, count);
        }
        if (!cond.item_counts.empty()) {
          mine_tree(cond, min_count, max_size, suffix, emit);
        }
      }
    }
    suffix.pop_back();
  }
}

std::vector<StateItem> to_state_items(const std::vector<int>& pattern,
                                      const ItemDict& dict) {
  std::vector<StateItem> items;
  items.reserve(pattern.size());
  for (int id : pattern) items.push_back(dict.items[static_cast<std::size_t>(id)]);
  std::sort(items.begin(), items.end());
  return items;
}

void validate_thresholds(const MiningConfig& config) {
  if (!(config.theta > 0.0 && config.theta < config.gamma &&
        config.gamma < 1.0)) {
    raise(Errc::kInvalidSpec, "mining thresholds must satisfy 0 < theta < gamma < 1");
  }
}

}  // namespace

std::vector<Transaction> build_transactions(
    std::span<const LabeledSignal> streams, double window_seconds) {
  if (window_seconds <= 0.0) {
    raise(Errc::kInvalidSpec, "window must be positive");
  }
  double t0 = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const LabeledSignal& s : streams) {
    if (!s.labels.empty()) {
      any = true;
      t0 = std::min(t0, s.labels.front().timestamp);
    }
  }
  if (!any) raise(Errc::kEmptyInput, "no labels to window");

  // window -> (id, signal) -> component of the last label in that window
  std::map<std::size_t, std::map<std::pair<std::uint32_t, std::string>, int>>
      windows;
  for (const LabeledSignal& s : streams) {
    const auto key = std::make_pair(s.can_id, s.signal_name);
    for (const PovLabel& label : s.labels) {
      const auto idx = static_cast<std::size_t>(
          std::floor((label.timestamp - t0) / window_seconds));
      windows[idx][key] = label.component;
    }
  }

  std::vector<Transaction> out;
  out.reserve(windows.size());
  for (const auto& [idx, members] : windows) {
    Transaction txn;
    txn.window_index = idx;
    txn.window_start = t0 + static_cast<double>(idx) * window_seconds;
    for (const auto& [key, component] : members) {
      txn.items.push_back({key.first, key.second, component});
    }
    std::sort(txn.items.begin(), txn.items.end());
    out.push_back(std::move(txn));
  }
  return out;
}

double support(std::span<const StateItem> pattern,
               std::span<const Transaction> transactions) {
  if (transactions.empty()) {
    raise(Errc::kEmptyInput, "support over zero transactions");
  }
  if (pattern.empty()) return 1.0;
  std::size_t count = 0;
  for (const Transaction& t : transactions) {
    if (std::includes(t.items.begin(), t.items.end(), pattern.begin(),
                      pattern.end())) {
      ++count;
    }
  }
  return static_cast<double>(count) / static_cast<double>(transactions.size());
}

std::vector<StatePattern> mine_frequent_patterns(
    std::span<const Transaction> transactions, std::size_t min_support_count,
    std::size_t max_pattern_size) {
  if (min_support_count < 1) {
    raise(Errc::kInvalidSpec, "min_support_count must be >= 1");
  }
  if (transactions.empty()) return {};

  IndexedTransactions idx = index_transactions(transactions);

  std::map<int, std::size_t> counts;
  for (const auto& row : idx.rows) {
    for (int item : row) ++counts[item];
  }

  FpTree tree;
  for (const auto& row : idx.rows) {
    const std::vector<int> ordered =
        order_for_tree(row, counts, min_support_count);
    if (!ordered.empty()) tree.insert(ordered, 1);
  }

  std::vector<StatePattern> patterns;
  std::vector<int> suffix;
  mine_tree(tree, min_support_count, max_pattern_size, suffix,
            [&](const std::vector<int>& pattern, std::size_t count) {
              patterns.push_back({to_state_items(pattern, idx.dict), count,
                                  transactions.size()});
            });

  std::sort(patterns.begin(), patterns.end(),
            [](const StatePattern& a, const StatePattern& b) {
              if (a.items.size() != b.items.size()) {
                return a.items.size() < b.items.size();
              }
              return a.items < b.items;
            });
  return patterns;
}

std::vector<InvariantRule> derive_rules(
    std::span<const StatePattern> patterns,
    std::span<const Transaction> transactions, const MiningConfig& config) {
  validate_thresholds(config);
  if (transactions.empty() || patterns.empty()) return {};

  IndexedTransactions idx = index_transactions(transactions);
  const TidSets tids(idx);
  const auto n_items = idx.dict.items.size();
  const auto total = static_cast<double>(transactions.size());

  std::vector<std::size_t> item_counts(n_items, 0);
  for (std::size_t i = 0; i < n_items; ++i) {
    item_counts[i] = tids.count(tids.sets[i]);
  }

  std::vector<InvariantRule> rules;
  for (const StatePattern& pattern : patterns) {
    std::vector<int> w;
    w.reserve(pattern.items.size());
    bool known = !pattern.items.empty();
    for (const StateItem& item : pattern.items) {
      const int id = idx.dict.find(item);
      if (id < 0) {
        known = false;
        break;
      }
      w.push_back(id);
    }
    if (!known) continue;
    std::sort(w.begin(), w.end());

    const std::vector<std::uint64_t> w_tids = tids.intersect(w);
    const std::size_t w_count = tids.count(w_tids);
    if (w_count == 0) continue;

    // Closure of W: items present in (almost) every transaction containing
    // W. With zero slack this is the exact closure, and consequents built
    // from it can never be dominated by another retained rule.
    std::vector<int> closure;
    for (std::size_t i = 0; i < n_items; ++i) {
      if (tids.uncovered(w_tids, static_cast<int>(i)) <= config.count_slack) {
        closure.push_back(static_cast<int>(i));
      }
    }
    if (closure.size() == w.size()) continue;  // W is closed; no consequent

    const std::vector<std::uint64_t> z_tids = tids.intersect(closure);
    const std::size_t z_count = tids.count(z_tids);
    if (w_count - z_count > config.count_slack) continue;

    // Minimum Support Principle on Z = W u M (strict on both bounds).
    std::size_t min_item_count = transactions.size();
    for (int item : closure) {
      min_item_count =
          std::min(min_item_count, item_counts[static_cast<std::size_t>(item)]);
    }
    const auto z_countf = static_cast<double>(z_count);
    if (!(z_countf > config.gamma * static_cast<double>(min_item_count) &&
          z_countf > config.theta * total)) {
      continue;
    }

    InvariantRule rule;
    rule.antecedent = to_state_items(w, idx.dict);
    std::vector<int> consequent;
    std::set_difference(closure.begin(), closure.end(), w.begin(), w.end(),
                        std::back_inserter(consequent));
    rule.consequent = to_state_items(consequent, idx.dict);
    rule.support = z_countf / total;
    rule.support_count = z_count;
    rules.push_back(std::move(rule));
  }

  std::sort(rules.begin(), rules.end(),
            [](const InvariantRule& a, const InvariantRule& b) {
              if (a.antecedent.size() != b.antecedent.size()) {
                return a.antecedent.size() < b.antecedent.size();
              }
              if (a.antecedent != b.antecedent) {
                return a.antecedent < b.antecedent;
              }
              return a.consequent < b.consequent;
            });
  return rules;
}

bool rule_violated(const InvariantRule& rule, const Transaction& txn) {
  const bool antecedent_present =
      std::includes(txn.items.begin(), txn.items.end(), rule.antecedent.begin(),
                    rule.antecedent.end());
  if (!antecedent_present) return false;
  const bool consequent_present =
      std::includes(txn.items.begin(), txn.items.end(), rule.consequent.begin(),
                    rule.consequent.end());
  return !consequent_present;
}

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (double gamma : {0.7, 0.8, 0.9, 0.95}) {
    for (double theta : {0.01, 0.05, 0.1}) {
      grid.push_back({gamma, theta});
    }
  }
  return grid;
}

GridSearchResult human_intervention_search(
    std::span<const Transaction> train,
    std::span<const Transaction> validation, std::span<const GridPoint> grid,
    const MiningConfig& config, std::function<double()> now_seconds) {
  if (grid.empty()) raise(Errc::kEmptyGrid, "empty (gamma, theta) grid");
  if (!now_seconds) {
    now_seconds = [] {
      return std::chrono::duration<double>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }

  double theta_min = grid[0].theta;
  for (const GridPoint& p : grid) theta_min = std::min(theta_min, p.theta);
  const auto min_count = static_cast<std::size_t>(std::floor(
                             theta_min * static_cast<double>(train.size()))) +
                         1;
  const std::vector<StatePattern> patterns =
      mine_frequent_patterns(train, min_count, config.max_pattern_size);

  GridSearchResult result;
  bool have_best = false;
  double best_objective = 0.0;

  for (const GridPoint& point : grid) {
    MiningConfig cfg = config;
    cfg.gamma = point.gamma;
    cfg.theta = point.theta;
    std::vector<InvariantRule> rules = derive_rules(patterns, train, cfg);

    std::size_t violating = 0;
    const double t_begin = now_seconds();
    for (const Transaction& txn : validation) {
      for (const InvariantRule& rule : rules) {
        if (rule_violated(rule, txn)) {
          ++violating;
          break;
        }
      }
    }
    const double t_end = now_seconds();

    GridPointStats stats;
    stats.gamma = point.gamma;
    stats.theta = point.theta;
    stats.rule_count = rules.size();
    stats.mean_check_seconds =
        validation.empty()
            ? 0.0
            : (t_end - t_begin) / static_cast<double>(validation.size());
    stats.validation_error =
        validation.empty()
            ? 0.0
            : static_cast<double>(violating) /
                  static_cast<double>(validation.size());

    const double over_t = stats.mean_check_seconds - config.delta_t;
    const double over_e = stats.validation_error - config.delta_e;
    const double pen_t = config.hinge_penalties ? std::max(0.0, over_t) : over_t;
    const double pen_e = config.hinge_penalties ? std::max(0.0, over_e) : over_e;
    stats.objective = static_cast<double>(rules.size()) -
                      config.lambda_t * pen_t - config.lambda_e * pen_e;
    result.table.push_back(stats);

    const bool better =
        !have_best || stats.objective > best_objective ||
        (stats.objective == best_objective &&
         (point.theta > result.theta ||
          (point.theta == result.theta && point.gamma > result.gamma)));
    if (better) {
      have_best = true;
      best_objective = stats.objective;
      result.gamma = point.gamma;
      result.theta = point.theta;
      result.rules = std::move(rules);
    }
  }
  return result;
}

const GmmModel* PayloadRuleBank::find_model(
    std::uint32_t can_id, const std::string& signal_name) const {
  for (const GmmModel& m : models) {
    if (m.can_id == can_id && m.signal_name == signal_name) return &m;
  }
  return nullptr;
}

const BankClusterEntry* PayloadRuleBank::find_cluster(
    std::uint32_t can_id) const {
  for (const BankClusterEntry& c : clusters) {
    if (std::binary_search(c.cluster.member_ids.begin(),
                           c.cluster.member_ids.end(), can_id)) {
      return &c;
    }
  }
  return nullptr;
}

}  // namespace athena
