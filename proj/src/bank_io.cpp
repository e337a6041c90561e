#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "athena/errors.hpp"
#include "athena/rules.hpp"
#include "athena/util.hpp"

namespace athena {

namespace {

using nlohmann::json;

json finite_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double number_or(const json& j, double fallback) {
  return j.is_null() ? fallback : j.get<double>();
}

json item_json(const StateItem& item) {
  return json::array({hex_id(item.can_id), item.signal_name, item.component});
}

StateItem item_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    raise(Errc::kIntegrityError, "rule item must be [id, signal, component]");
  }
  StateItem item;
  item.can_id = parse_hex_id(j[0].get<std::string>());
  item.signal_name = j[1].get<std::string>();
  item.component = j[2].get<int>();
  return item;
}

json items_json(const std::vector<StateItem>& items) {
  json out = json::array();
  for (const StateItem& item : items) out.push_back(item_json(item));
  return out;
}

std::vector<StateItem> items_from_json(const json& j) {
  std::vector<StateItem> out;
  for (const json& e : j) out.push_back(item_from_json(e));
  return out;
}

}  // namespace

std::string serialize_rule_bank(const PayloadRuleBank& bank) {
  json doc;
  doc["schema_version"] = bank.schema_version;

  json meta;
  meta["gamma"] = bank.meta.gamma;
  meta["theta"] = bank.meta.theta;
  meta["window_policy"] = bank.meta.window_policy;
  meta["fixed_window"] = bank.meta.fixed_window;
  meta["dataset_digest"] = bank.meta.dataset_digest;
  meta["k_max"] = bank.meta.k_max;
  meta["seed"] = bank.meta.seed;
  meta["cluster_tolerance"] = bank.meta.cluster_tolerance;
  meta["max_pattern_size"] = bank.meta.max_pattern_size;
  meta["count_slack"] = bank.meta.count_slack;
  meta["density_margin"] = bank.meta.density_margin;
  doc["meta"] = std::move(meta);

  json clusters = json::array();
  for (const BankClusterEntry& entry : bank.clusters) {
    json c;
    c["cluster_id"] = entry.cluster.cluster_id;
    json ids = json::array();
    for (std::uint32_t id : entry.cluster.member_ids) ids.push_back(hex_id(id));
    c["member_ids"] = std::move(ids);
    c["representative_period"] = entry.cluster.representative_period;
    c["window_seconds"] = entry.window_seconds;
    c["n_windows"] = entry.n_windows;
    clusters.push_back(std::move(c));
  }
  doc["clusters"] = std::move(clusters);

  json models = json::array();
  for (const GmmModel& m : bank.models) {
    json j;
    j["can_id"] = hex_id(m.can_id);
    j["signal"] = m.signal_name;
    j["components"] = m.component_count;
    j["weights"] = m.weights;
    j["means"] = m.means;
    j["stdevs"] = m.stdevs;
    j["min_membership"] = m.min_membership;
    j["bic"] = finite_or_null(m.bic);
    j["n_train"] = m.n_train;
    j["sigma_floor"] = m.sigma_floor;
    j["min_train_log_density"] = finite_or_null(m.min_train_log_density);
    models.push_back(std::move(j));
  }
  doc["models"] = std::move(models);

  json rules = json::array();
  for (const InvariantRule& r : bank.rules) {
    json j;
    j["cluster_id"] = r.cluster_id;
    j["antecedent"] = items_json(r.antecedent);
    j["consequent"] = items_json(r.consequent);
    j["support"] = r.support;
    j["support_count"] = r.support_count;
    rules.push_back(std::move(j));
  }
  doc["rules"] = std::move(rules);

  return doc.dump(2) + "\n";
}

namespace {

void validate_bank(const PayloadRuleBank& bank) {
  std::set<std::uint32_t> clustered_ids;
  std::set<int> cluster_ids;
  for (const BankClusterEntry& entry : bank.clusters) {
    if (!cluster_ids.insert(entry.cluster.cluster_id).second) {
      raise(Errc::kIntegrityError, "duplicate cluster_id");
    }
    for (std::uint32_t id : entry.cluster.member_ids) {
      if (!clustered_ids.insert(id).second) {
        raise(Errc::kIntegrityError,
              "id " + hex_id(id) + " appears in two clusters");
      }
    }
    if (entry.window_seconds <= 0.0) {
      raise(Errc::kIntegrityError, "cluster window must be positive");
    }
  }

  for (const GmmModel& m : bank.models) {
    const auto k = static_cast<std::size_t>(m.component_count);
    if (m.component_count < 1 || m.weights.size() != k ||
        m.means.size() != k || m.stdevs.size() != k ||
        m.min_membership.size() != k) {
      raise(Errc::kIntegrityError,
            "model " + hex_id(m.can_id) + "/" + m.signal_name +
                " has inconsistent shapes");
    }
    double wsum = 0.0;
    for (double w : m.weights) wsum += w;
    if (std::abs(wsum - 1.0) > 1e-9) {
      raise(Errc::kIntegrityError, "model weights must sum to 1");
    }
    for (double s : m.stdevs) {
      if (!(s > 0.0)) raise(Errc::kIntegrityError, "model stdev must be > 0");
    }
    for (double r : m.min_membership) {
      if (!(r >= 0.0 && r <= 1.0)) {
        raise(Errc::kIntegrityError, "min_membership outside [0, 1]");
      }
    }
    for (std::size_t i = 1; i < k; ++i) {
      if (m.means[i] < m.means[i - 1]) {
        raise(Errc::kIntegrityError, "model components not sorted by mean");
      }
    }
    if (!clustered_ids.count(m.can_id)) {
      raise(Errc::kIntegrityError,
            "model id " + hex_id(m.can_id) + " not in any cluster");
    }
  }

  for (const InvariantRule& r : bank.rules) {
    if (r.antecedent.empty() || r.consequent.empty()) {
      raise(Errc::kIntegrityError, "rule with empty side");
    }
    if (!cluster_ids.count(r.cluster_id)) {
      raise(Errc::kIntegrityError, "rule references unknown cluster");
    }
    std::set<StateItem> seen(r.antecedent.begin(), r.antecedent.end());
    for (const StateItem& item : r.consequent) {
      if (seen.count(item)) {
        raise(Errc::kIntegrityError, "rule antecedent and consequent overlap");
      }
    }
    auto check_item = [&](const StateItem& item) {
      const GmmModel* model = bank.find_model(item.can_id, item.signal_name);
      if (model == nullptr) {
        raise(Errc::kIntegrityError,
              "rule references missing model " + hex_id(item.can_id) + "/" +
                  item.signal_name);
      }
      if (item.component < 1 || item.component > model->component_count) {
        raise(Errc::kIntegrityError,
              "rule references component " + std::to_string(item.component) +
                  " of a K=" + std::to_string(model->component_count) +
                  " model");
      }
    };
    for (const StateItem& item : r.antecedent) check_item(item);
    for (const StateItem& item : r.consequent) check_item(item);
  }
}

}  // namespace

PayloadRuleBank load_rule_bank(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    raise(Errc::kSchemaMismatch, std::string("not a rule bank: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") ||
      doc["schema_version"] != kBankSchemaVersion) {
    raise(Errc::kSchemaMismatch, "unknown rule bank schema_version");
  }

  PayloadRuleBank bank;
  try {
    const json& meta = doc.at("meta");
    bank.meta.gamma = meta.at("gamma").get<double>();
    bank.meta.theta = meta.at("theta").get<double>();
    bank.meta.window_policy = meta.at("window_policy").get<std::string>();
    bank.meta.fixed_window = meta.at("fixed_window").get<double>();
    bank.meta.dataset_digest = meta.at("dataset_digest").get<std::string>();
    bank.meta.k_max = meta.at("k_max").get<int>();
    bank.meta.seed = meta.at("seed").get<std::uint64_t>();
    bank.meta.cluster_tolerance = meta.at("cluster_tolerance").get<double>();
    bank.meta.max_pattern_size = meta.at("max_pattern_size").get<std::size_t>();
    bank.meta.count_slack = meta.at("count_slack").get<std::size_t>();
    bank.meta.density_margin = meta.at("density_margin").get<double>();

    for (const json& c : doc.at("clusters")) {
      BankClusterEntry entry;
      entry.cluster.cluster_id = c.at("cluster_id").get<int>();
      for (const json& id : c.at("member_ids")) {
        entry.cluster.member_ids.push_back(
            parse_hex_id(id.get<std::string>()));
      }
      std::sort(entry.cluster.member_ids.begin(),
                entry.cluster.member_ids.end());
      entry.cluster.representative_period =
          c.at("representative_period").get<double>();
      entry.window_seconds = c.at("window_seconds").get<double>();
      entry.n_windows = c.at("n_windows").get<std::size_t>();
      bank.clusters.push_back(std::move(entry));
    }

    for (const json& j : doc.at("models")) {
      GmmModel m;
      m.can_id = parse_hex_id(j.at("can_id").get<std::string>());
      m.signal_name = j.at("signal").get<std::string>();
      m.component_count = j.at("components").get<int>();
      m.weights = j.at("weights").get<std::vector<double>>();
      m.means = j.at("means").get<std::vector<double>>();
      m.stdevs = j.at("stdevs").get<std::vector<double>>();
      m.min_membership = j.at("min_membership").get<std::vector<double>>();
      m.bic = number_or(j.at("bic"), std::numeric_limits<double>::quiet_NaN());
      m.n_train = j.at("n_train").get<std::size_t>();
      m.sigma_floor = j.at("sigma_floor").get<double>();
      m.min_train_log_density =
          number_or(j.at("min_train_log_density"),
                    -std::numeric_limits<double>::infinity());
      bank.models.push_back(std::move(m));
    }

    for (const json& j : doc.at("rules")) {
      InvariantRule r;
      r.cluster_id = j.at("cluster_id").get<int>();
      r.antecedent = items_from_json(j.at("antecedent"));
      r.consequent = items_from_json(j.at("consequent"));
      r.support = j.at("support").get<double>();
      r.support_count = j.at("support_count").get<std::size_t>();
      bank.rules.push_back(std::move(r));
    }
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    raise(Errc::kIntegrityError, std::string("rule bank structure: ") + e.what());
  }

  validate_bank(bank);
  return bank;
}

}  // namespace athena
