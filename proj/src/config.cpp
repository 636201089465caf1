#include "rankgauntlet/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "rankgauntlet/error.hpp"

namespace rankgauntlet {

namespace {

std::string num(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string num(long long x) { return std::to_string(x); }

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::kInvalidConfig, key + " = '" + value + "' is not " + want);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

class Reader {
 public:
  explicit Reader(const ConfigMap& cfg) : cfg_(cfg) {
    const auto known = default_config();
    for (const auto& [k, v] : cfg_)
      if (!known.count(k)) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + k + "'");
  }

  const std::string& str(const std::string& key) const {
    const auto it = cfg_.find(key);
    if (it == cfg_.end()) throw Error(ErrorCode::kInvalidConfig, "missing config key '" + key + "'");
    return it->second;
  }

  long long integer(const std::string& key) const {
    const auto& s = str(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, s, "an integer");
    return v;
  }

  int small(const std::string& key) const {
    const long long v = integer(key);
    if (v < -1000000000LL || v > 1000000000LL) bad(key, str(key), "in range");
    return static_cast<int>(v);
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad(key, s, "a finite number");
    return v;
  }

  std::vector<int> ints(const std::string& key) const {
    std::vector<int> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      int v = 0;
      const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (item.empty() || ec != std::errc() || p != item.data() + item.size()) bad(key, str(key), "a list of integers");
      out.push_back(v);
    }
    return out;
  }

 private:
  const ConfigMap& cfg_;
};

}  // namespace

ConfigMap default_config() {
  const ExperimentConfig d;
  ConfigMap m;
  m["experiment.seed"] = num(static_cast<long long>(d.seed));
  m["experiment.clients"] = num(static_cast<long long>(d.total_clients));
  m["experiment.per_round"] = num(static_cast<long long>(d.per_round));
  m["experiment.rounds"] = num(static_cast<long long>(d.rounds));
  m["experiment.malicious"] = num(static_cast<long long>(d.malicious));
  m["experiment.k_percent"] = num(d.k_percent);

  m["data.path"] = d.data_path;
  m["data.samples"] = num(static_cast<long long>(d.blobs.samples));
  m["data.features"] = num(static_cast<long long>(d.blobs.features));
  m["data.classes"] = num(static_cast<long long>(d.blobs.classes));
  m["data.center_spread"] = num(d.blobs.center_spread);
  m["data.noise"] = num(d.blobs.noise);
  m["data.train_fraction"] = num(d.train_fraction);

  m["model.hidden"] = join(d.hidden);

  m["partition.kind"] = d.partition == PartitionKind::kIid ? "iid" : "dirichlet";
  m["partition.beta"] = num(d.beta);

  m["train.local_epochs"] = num(static_cast<long long>(d.train.local_epochs));
  m["train.batch_size"] = num(static_cast<long long>(d.train.batch_size));
  m["train.learning_rate"] = num(d.train.learning_rate);
  m["train.momentum"] = num(d.train.momentum);
  m["train.weight_decay"] = num(d.train.weight_decay);

  const auto& a = d.attack_params;
  m["attack.name"] = std::string(to_string(d.attack));
  m["attack.zeta"] = num(a.zeta);
  m["attack.estimation"] = a.estimation == EstimationMethod::kHistorical ? "historical" : "alternative";
  m["attack.empty_range"] = a.empty_range == EmptyRangePolicy::kBenign ? "benign" : "reverse_rank";
  m["attack.noise_scale"] = num(a.noise_scale);
  m["attack.gamma_max"] = num(a.gamma_max);
  m["attack.gamma_iterations"] = num(static_cast<long long>(a.gamma_iterations));
  m["attack.sinkhorn_iterations"] = num(static_cast<long long>(a.sinkhorn.iterations));
  m["attack.temperature"] = num(a.sinkhorn.temperature);
  m["attack.sinkhorn_tolerance"] = num(a.sinkhorn.tolerance);
  m["attack.sinkhorn_max_iterations"] = num(static_cast<long long>(a.sinkhorn.max_iterations));
  m["attack.epochs"] = num(static_cast<long long>(a.sinkhorn.epochs));
  m["attack.learning_rate"] = num(a.sinkhorn.learning_rate);
  m["attack.gumbel_scale"] = num(a.sinkhorn.gumbel_scale);

  const auto& p = d.defense_params;
  m["defense.name"] = std::string(to_string(d.defense));
  m["defense.afa_xi"] = num(p.afa_xi);
  m["defense.afa_step"] = num(p.afa_step);
  m["defense.dnc_subsample"] = num(p.dnc.subsample);
  m["defense.dnc_filter_frac"] = num(p.dnc.filter_frac);
  m["defense.root_samples"] = num(static_cast<long long>(p.root_samples));
  return m;
}

ConfigMap parse_config(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config parse error: ") + e.what());
  }
  ConfigMap out;
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      out[section] = trim(node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) out[section + "." + key] = trim(leaf.data());
  }
  return out;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open config '" + path + "'");
  return parse_config(in);
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "override '" + assignment + "' lacks '='");
  const std::string key = trim(assignment.substr(0, eq));
  if (!default_config().count(key)) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
  cfg[key] = trim(assignment.substr(eq + 1));
}

ConfigMap resolve_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides,
                         const char* env_seed) {
  ConfigMap cfg = default_config();
  if (path) {
    for (const auto& [k, v] : read_config_file(*path)) {
      if (!cfg.count(k)) throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + k + "'");
      cfg[k] = v;
    }
  }
  if (env_seed && *env_seed) cfg["experiment.seed"] = trim(env_seed);
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

ExperimentConfig to_experiment(const ConfigMap& cfg) {
  const Reader r(cfg);
  ExperimentConfig e;
  const long long seed = r.integer("experiment.seed");
  if (seed < 0) bad("experiment.seed", r.str("experiment.seed"), "non-negative");
  e.seed = static_cast<std::uint64_t>(seed);
  e.total_clients = r.small("experiment.clients");
  e.per_round = r.small("experiment.per_round");
  e.rounds = r.small("experiment.rounds");
  e.malicious = r.small("experiment.malicious");
  e.k_percent = r.real("experiment.k_percent");

  e.data_path = r.str("data.path");
  e.blobs.samples = r.small("data.samples");
  e.blobs.features = r.small("data.features");
  e.blobs.classes = r.small("data.classes");
  e.blobs.center_spread = r.real("data.center_spread");
  e.blobs.noise = r.real("data.noise");
  e.train_fraction = r.real("data.train_fraction");

  e.hidden = r.ints("model.hidden");

  const auto& kind = r.str("partition.kind");
  if (kind == "iid") e.partition = PartitionKind::kIid;
  else if (kind == "dirichlet") e.partition = PartitionKind::kDirichlet;
  else bad("partition.kind", kind, "iid or dirichlet");
  e.beta = r.real("partition.beta");

  e.train.local_epochs = r.small("train.local_epochs");
  e.train.batch_size = r.small("train.batch_size");
  e.train.learning_rate = r.real("train.learning_rate");
  e.train.momentum = r.real("train.momentum");
  e.train.weight_decay = r.real("train.weight_decay");

  auto& a = e.attack_params;
  e.attack = parse_attack(r.str("attack.name"));
  a.zeta = r.real("attack.zeta");
  const auto& est = r.str("attack.estimation");
  if (est == "historical") a.estimation = EstimationMethod::kHistorical;
  else if (est == "alternative") a.estimation = EstimationMethod::kAlternative;
  else bad("attack.estimation", est, "historical or alternative");
  const auto& empty = r.str("attack.empty_range");
  if (empty == "benign") a.empty_range = EmptyRangePolicy::kBenign;
  else if (empty == "reverse_rank") a.empty_range = EmptyRangePolicy::kReverseRank;
  else bad("attack.empty_range", empty, "benign or reverse_rank");
  a.noise_scale = r.real("attack.noise_scale");
  a.gamma_max = r.real("attack.gamma_max");
  a.gamma_iterations = r.small("attack.gamma_iterations");
  a.sinkhorn.iterations = r.small("attack.sinkhorn_iterations");
  a.sinkhorn.temperature = r.real("attack.temperature");
  a.sinkhorn.tolerance = r.real("attack.sinkhorn_tolerance");
  a.sinkhorn.max_iterations = r.small("attack.sinkhorn_max_iterations");
  a.sinkhorn.epochs = r.small("attack.epochs");
  a.sinkhorn.learning_rate = r.real("attack.learning_rate");
  a.sinkhorn.gumbel_scale = r.real("attack.gumbel_scale");
  if (a.noise_scale < 0.0) bad("attack.noise_scale", r.str("attack.noise_scale"), "non-negative");
  if (!(a.gamma_max > 0.0) || a.gamma_iterations < 1) bad("attack.gamma_max", r.str("attack.gamma_max"), "a valid search");

  auto& p = e.defense_params;
  e.defense = parse_defense(r.str("defense.name"));
  p.afa_xi = r.real("defense.afa_xi");
  p.afa_step = r.real("defense.afa_step");
  p.dnc.subsample = r.real("defense.dnc_subsample");
  p.dnc.filter_frac = r.real("defense.dnc_filter_frac");
  p.dnc.seed = e.seed;
  p.root_samples = r.small("defense.root_samples");
  if (!(p.afa_xi > 0.0) || p.afa_step < 0.0) bad("defense.afa_xi", r.str("defense.afa_xi"), "a valid AFA schedule");
  if (!(p.dnc.subsample > 0.0 && p.dnc.subsample <= 1.0)) bad("defense.dnc_subsample", r.str("defense.dnc_subsample"), "in (0, 1]");
  if (p.dnc.filter_frac < 0.0) bad("defense.dnc_filter_frac", r.str("defense.dnc_filter_frac"), "non-negative");

  e.validate();
  return e;
}

std::string config_hash(const ConfigMap& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : cfg) feed(k + "=" + v + "\n");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_config(std::ostream& os, const ConfigMap& cfg) {
  std::string section;
  for (const auto& [k, v] : cfg) {
    const auto dot = k.find('.');
    const std::string s = k.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << k.substr(dot + 1) << " = " << v << '\n';
  }
}

}  // namespace rankgauntlet
