#include "adagrpo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace adagrpo {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ConfigError("cannot render number");
  return std::string(buf, end);
}

// One [section] of the file with typed, key-checked accessors.
class Section {
 public:
  Section(std::string name, const pt::ptree& tree, std::set<std::string> allowed)
      : name_(std::move(name)), tree_(tree) {
    for (const auto& [key, child] : tree_) {
      if (!child.empty()) throw ConfigError("[" + name_ + "]: nested key '" + key + "'");
      if (!allowed.contains(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  std::string text(const std::string& key) const { return trim(tree_.get<std::string>(key)); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = text(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("key '" + name_ + "." + key + "': expected a number, got '" + raw + "'");
    }
  }

  int integer(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = text(key);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
      throw ConfigError("key '" + name_ + "." + key + "': expected an integer, got '" + raw + "'");
    }
    return v;
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = text(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
      throw ConfigError("key '" + name_ + "." + key + "': expected an unsigned integer, got '" + raw + "'");
    }
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string raw = text(key);
    std::transform(raw.begin(), raw.end(), raw.begin(), [](unsigned char c) { return std::tolower(c); });
    if (raw == "true" || raw == "1" || raw == "on" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "off" || raw == "no") return false;
    throw ConfigError("key '" + name_ + "." + key + "': expected a boolean, got '" + raw + "'");
  }

  template <typename F>
  auto parsed(const std::string& key, F&& parse, decltype(parse(std::string_view{})) fallback) const {
    if (!has(key)) return fallback;
    try {
      return parse(text(key));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key '" + name_ + "." + key + "': " + e.what());
    }
  }

 private:
  std::string name_;
  const pt::ptree& tree_;
};

std::vector<std::pair<std::string, double>> parse_mixture(const std::string& section,
                                                          const std::string& raw) {
  std::vector<std::pair<std::string, double>> out;
  std::string normalized = raw;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream tokens(normalized);
  std::string item;
  while (tokens >> item) {
    const auto colon = item.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
      throw ConfigError("key '" + section + ".mixture': expected FAMILY:weight, got '" + item + "'");
    }
    try {
      std::size_t used = 0;
      const std::string weight = item.substr(colon + 1);
      const double w = std::stod(weight, &used);
      if (used != weight.size()) throw std::invalid_argument(weight);
      out.emplace_back(item.substr(0, colon), w);
    } catch (const std::exception&) {
      throw ConfigError("key '" + section + ".mixture': bad weight in '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("key '" + section + ".mixture': empty mixture");
  return out;
}

void apply_override(pt::ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "': expected section.key=value");
  }
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const std::string value = trim(assignment.substr(eq + 1));
  if (section.empty() || key.empty()) throw ConfigError("override '" + assignment + "': empty section or key");
  auto it = tree.find(section);
  pt::ptree* sec = nullptr;
  if (it == tree.not_found()) {
    sec = &tree.push_back({section, pt::ptree{}})->second;
  } else {
    sec = &tree.to_iterator(it)->second;
  }
  sec->put(pt::ptree::path_type(key, '\0'), value);
}

ExperimentConfig from_tree(const pt::ptree& tree) {
  ExperimentConfig cfg;
  std::vector<TaskFamilySpec> families;
  std::vector<CurriculumPhase> phases;

  for (const auto& [name, sec_tree] : tree) {
    if (sec_tree.empty() && !sec_tree.data().empty()) {
      throw ConfigError("key '" + name + "' appears outside any section");
    }
    const auto space = name.find(' ');
    const std::string kind = name.substr(0, space);
    const std::string label = space == std::string::npos ? std::string() : trim(name.substr(space + 1));

    if (kind == "experiment" && label.empty()) {
      Section s(name, sec_tree, {"seed", "output_dir", "eval_tasks"});
      cfg.seed = s.unsigned64("seed", cfg.seed);
      if (s.has("output_dir")) cfg.output_dir = s.text("output_dir");
      cfg.eval_tasks = s.integer("eval_tasks", cfg.eval_tasks);
    } else if (kind == "environment" && label.empty()) {
      Section s(name, sec_tree, {"answers", "cue_noise"});
      cfg.env.answers = s.integer("answers", cfg.env.answers);
      cfg.env.cue_noise = s.number("cue_noise", cfg.env.cue_noise);
    } else if (kind == "family" && !label.empty()) {
      Section s(name, sec_tree, {"signal_sym", "signal_vis", "noise_std"});
      families.push_back({label, s.number("signal_sym", 0.0), s.number("signal_vis", 0.0),
                          s.number("noise_std", 1.0)});
    } else if (kind == "phase" && !label.empty()) {
      Section s(name, sec_tree, {"mixture", "difficulty", "iterations"});
      if (!s.has("mixture")) throw ConfigError("[" + name + "]: missing key 'mixture'");
      if (!s.has("iterations")) throw ConfigError("[" + name + "]: missing key 'iterations'");
      phases.push_back({label, parse_mixture(name, s.text("mixture")), s.number("difficulty", 1.0),
                        s.integer("iterations", 0)});
    } else if (kind == "trainer" && label.empty()) {
      Section s(name, sec_tree,
                {"variant", "n", "clip_eps", "kl_coef", "temperature", "lr", "momentum", "iterations",
                 "inner_epochs", "curriculum", "center_mode_advantage", "format_weight", "reference",
                 "probe_every", "probe_tasks_per_family"});
      TrainerConfig& t = cfg.trainer;
      t.variant = s.parsed("variant", parse_variant, t.variant);
      t.n = s.integer("n", t.n);
      t.clip_eps = s.number("clip_eps", t.clip_eps);
      t.kl_coef = s.number("kl_coef", t.kl_coef);
      t.temperature = s.number("temperature", t.temperature);
      t.lr = s.number("lr", t.lr);
      t.momentum = s.number("momentum", t.momentum);
      t.iterations = s.integer("iterations", t.iterations);
      t.inner_epochs = s.integer("inner_epochs", t.inner_epochs);
      t.curriculum = s.boolean("curriculum", t.curriculum);
      t.center_mode_advantage = s.boolean("center_mode_advantage", t.center_mode_advantage);
      t.format_weight = s.number("format_weight", t.format_weight);
      t.reference = s.parsed("reference", parse_reference, t.reference);
      t.probe_every = s.integer("probe_every", t.probe_every);
      t.probe_tasks_per_family = s.integer("probe_tasks_per_family", t.probe_tasks_per_family);
    } else if (kind == "sft" && label.empty()) {
      Section s(name, sec_tree, {"enabled", "demos_per_family", "grd_share", "steps", "lr", "momentum"});
      SftConfig& f = cfg.sft;
      f.enabled = s.boolean("enabled", f.enabled);
      f.demos_per_family = s.integer("demos_per_family", f.demos_per_family);
      f.grd_share = s.number("grd_share", f.grd_share);
      f.steps = s.integer("steps", f.steps);
      f.lr = s.number("lr", f.lr);
      f.momentum = s.number("momentum", f.momentum);
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  if (!families.empty()) cfg.env.families = std::move(families);
  if (!phases.empty()) cfg.schedule.phases = std::move(phases);
  cfg.validate();
  return cfg;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    env.validate();
    schedule.validate(env);
    trainer.validate();
    sft.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (eval_tasks < 1) throw ConfigError("experiment.eval_tasks must be >= 1");
  if (output_dir.empty()) throw ConfigError("experiment.output_dir must not be empty");
  if (trainer.curriculum && schedule.total_iterations() < trainer.iterations) {
    throw ConfigError("trainer.iterations (" + std::to_string(trainer.iterations) +
                      ") exceeds the curriculum budget (" + std::to_string(schedule.total_iterations()) + ")");
  }
}

ExperimentConfig parse_config(std::istream& in, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  // An override addressing a [family ...] or [phase ...] section refers to
  // the effective list, so pull in the built-in sections of that kind when
  // the file declares none.
  const pt::ptree defaults = [] {
    pt::ptree d;
    std::istringstream rendered(render_config(ExperimentConfig{}));
    pt::read_ini(rendered, d);
    return d;
  }();
  for (const std::string kind : {"family ", "phase "}) {
    auto declares = [&](const pt::ptree& t) {
      return std::any_of(t.begin(), t.end(), [&](const auto& s) { return s.first.starts_with(kind); });
    };
    const bool targeted = std::any_of(overrides.begin(), overrides.end(),
                                      [&](const std::string& o) { return trim(o).starts_with(kind); });
    if (targeted && !declares(tree)) {
      for (const auto& sec : defaults) {
        if (sec.first.starts_with(kind)) tree.push_back(sec);
      }
    }
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return from_tree(tree);
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return parse_config(in, overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
  auto num = [&](const std::string& key, double v) { kv(key, format_double(v)); };
  auto flag = [&](const std::string& key, bool v) { kv(key, v ? "true" : "false"); };

  out << "[experiment]\n";
  kv("seed", std::to_string(c.seed));
  kv("output_dir", c.output_dir);
  kv("eval_tasks", std::to_string(c.eval_tasks));

  out << "\n[environment]\n";
  kv("answers", std::to_string(c.env.answers));
  num("cue_noise", c.env.cue_noise);

  for (const auto& f : c.env.families) {
    out << "\n[family " << f.name << "]\n";
    num("signal_sym", f.signal_sym);
    num("signal_vis", f.signal_vis);
    num("noise_std", f.noise_std);
  }
  for (const auto& p : c.schedule.phases) {
    out << "\n[phase " << p.name << "]\n";
    std::string mixture;
    for (const auto& [name, w] : p.mixture) {
      if (!mixture.empty()) mixture += ", ";
      mixture += name + ":" + format_double(w);
    }
    kv("mixture", mixture);
    num("difficulty", p.difficulty);
    kv("iterations", std::to_string(p.iterations));
  }

  const TrainerConfig& t = c.trainer;
  out << "\n[trainer]\n";
  kv("variant", std::string(to_string(t.variant)));
  out << "# forced prefixes: " << (forces_prefixes(t.variant) ? "yes" : "no") << '\n';
  kv("n", std::to_string(t.n));
  num("clip_eps", t.clip_eps);
  num("kl_coef", t.kl_coef);
  num("temperature", t.temperature);
  num("lr", t.lr);
  num("momentum", t.momentum);
  kv("iterations", std::to_string(t.iterations));
  kv("inner_epochs", std::to_string(t.inner_epochs));
  flag("curriculum", t.curriculum);
  flag("center_mode_advantage", t.center_mode_advantage);
  num("format_weight", t.format_weight);
  kv("reference", std::string(to_string(t.reference)));
  kv("probe_every", std::to_string(t.probe_every));
  kv("probe_tasks_per_family", std::to_string(t.probe_tasks_per_family));

  const SftConfig& f = c.sft;
  out << "\n[sft]\n";
  flag("enabled", f.enabled);
  kv("demos_per_family", std::to_string(f.demos_per_family));
  num("grd_share", f.grd_share);
  kv("steps", std::to_string(f.steps));
  num("lr", f.lr);
  num("momentum", f.momentum);
  return out.str();
}

}  // namespace adagrpo
