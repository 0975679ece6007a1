#include "tdr/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    const std::string item = trim(std::string_view(text).substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Typed access to one section, remembering which keys were consumed.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  template <class T>
  void read(const std::string& key, T& target) {
    if (auto v = raw(key)) target = convert<T>(key, *v);
  }

  template <class T>
  T convert(const std::string& key, const std::string& text) const {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      fail(key, text, "a boolean");
    } else if constexpr (std::is_same_v<T, double>) {
      // Plain decimals are exact through from_chars; strtod would also
      // accept hex floats and locale quirks we do not want.
      double value{};
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) fail(key, text, "a number");
      return value;
    } else {
      T value{};
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) fail(key, text, "an integer");
      return value;
    }
  }

  void check_unused() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_)
      if (!used_.contains(key)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", name_, key));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& text, const char* expected) const {
    throw ConfigError(fmt::format("[{}] {}: expected {}, got '{}'", name_, key, expected, text));
  }

  const std::string& name() const { return name_; }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

std::vector<TruncationSchedule> parse_schedules(Section& sec, const std::string& key, const std::string& text) {
  std::vector<TruncationSchedule> out;
  for (const auto& item : split_list(text)) {
    try {
      out.push_back(TruncationSchedule::parse(item));
    } catch (const InvalidInput& e) {
      throw ConfigError(fmt::format("[{}] {}: {}", sec.name(), key, e.what()));
    }
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  static const std::set<std::string> known{"experiment", "mdp", "policy", "objective", "nuisance", "estimators"};
  for (const auto& [name, sub] : tree) {
    if (!known.contains(name)) throw ConfigError(fmt::format("unknown section or top-level key '{}'", name));
    if (sub.empty() && !sub.data().empty()) throw ConfigError(fmt::format("key '{}' outside any section", name));
  }
  auto section = [&](const std::string& name) {
    auto it = tree.find(name);
    return Section(it == tree.not_found() ? nullptr : &it->second, name);
  };

  ExperimentConfig c;

  Section exp = section("experiment");
  exp.read("id", c.id);
  exp.read("seed", c.seed);
  exp.read("replications", c.replications);
  exp.read("reference_replications", c.reference_replications);
  exp.read("burn_in", c.burn_in);
  exp.read("queue_cap", c.queue_cap);
  if (auto v = exp.raw("horizons")) {
    c.horizons.clear();
    for (const auto& item : split_list(*v)) c.horizons.push_back(exp.convert<std::size_t>("horizons", item));
  }
  exp.check_unused();

  Section mdp = section("mdp");
  const std::string setup = mdp.raw("setup").value_or("chain");
  if (setup == "chain") {
    ChainMdp chain;
    mdp.read("num_states", chain.num_states);
    mdp.read("reset_prob", chain.reset_prob);
    c.mdp = chain;
  } else if (setup == "queue") {
    QueueMdp queue;
    mdp.read("lambda0", queue.lambda0);
    mdp.read("lambda1", queue.lambda1);
    c.mdp = queue;
  } else {
    mdp.fail("setup", setup, "'chain' or 'queue'");
  }
  mdp.check_unused();

  Section pol = section("policy");
  pol.read("behavior", c.behavior_prob);
  pol.read("evaluation", c.evaluation_prob);
  pol.check_unused();

  Section obj = section("objective");
  const std::string kind = obj.raw("kind").value_or("discounted");
  if (kind == "discounted") {
    c.objective.kind = ObjectiveKind::discounted;
    obj.read("gamma", c.objective.gamma);
    const std::string init = obj.raw("initial").value_or("evaluation");
    if (init == "evaluation") {
      c.objective.initial = InitialKind::evaluation;
    } else if (init == "behavior") {
      c.objective.initial = InitialKind::behavior;
    } else if (init.starts_with("state:")) {
      c.objective.initial = InitialKind::state;
      c.objective.initial_state = obj.convert<State>("initial", init.substr(6));
    } else {
      obj.fail("initial", init, "evaluation, behavior or state:<k>");
    }
  } else if (kind == "longrun") {
    c.objective.kind = ObjectiveKind::longrun;
    if (obj.raw("gamma") || obj.raw("initial")) throw ConfigError("[objective]: gamma/initial apply only to discounted");
  } else {
    obj.fail("kind", kind, "'discounted' or 'longrun'");
  }
  obj.check_unused();

  Section nui = section("nuisance");
  if (auto v = nui.raw("q")) {
    if (*v == "exact") c.nuisance.q = QSource::exact;
    else if (*v == "td") c.nuisance.q = QSource::td;
    else nui.fail("q", *v, "'exact' or 'td'");
  }
  if (auto v = nui.raw("omega")) {
    if (*v == "exact") c.nuisance.omega = OmegaSource::exact;
    else if (*v == "moment_matching") c.nuisance.omega = OmegaSource::moment_matching;
    else nui.fail("omega", *v, "'exact' or 'moment_matching'");
  }
  nui.read("train_length", c.nuisance.train_length);
  nui.read("learning_rate", c.nuisance.learning_rate);
  nui.read("theta_rate", c.nuisance.theta_rate);
  nui.read("epochs", c.nuisance.epochs);
  nui.read("omega_train_length", c.nuisance.omega_train_length);
  nui.read("shared_training_data", c.nuisance.shared_training_data);
  nui.check_unused();

  Section est = section("estimators");
  if (auto v = est.raw("schedules")) c.schedules = parse_schedules(est, "schedules", *v);
  if (auto v = est.raw("lepski_grid")) {
    LepskiSettings ls;
    ls.grid = parse_schedules(est, "lepski_grid", *v);
    est.read("lepski_draws", ls.draws);
    est.read("lepski_z", ls.z);
    est.read("lepski_block_len", ls.block_len);
    c.lepski = std::move(ls);
  } else if (est.raw("lepski_draws") || est.raw("lepski_z") || est.raw("lepski_block_len")) {
    throw ConfigError("[estimators]: lepski settings given without lepski_grid");
  }
  est.read("plug_in_variance", c.plug_in_variance);
  est.check_unused();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  return parse_config(in);
}

}  // namespace tdr
