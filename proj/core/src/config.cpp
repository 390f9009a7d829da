#include "nlpn/config.hpp"

#include <cmath>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nlpn {
namespace {

using json = nlohmann::json;

const char* type_name(const json& j) { return j.type_name(); }

// Object view that remembers which keys were consumed, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  Section sub(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, key_path(key));
  }

  double number(const std::string& key, double def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(key_path(key), std::string("expected a number, got ") + type_name(*v));
    return v->get<double>();
  }

  long long integer(const std::string& key, long long def) {
    const json* v = find(key);
    if (!v) return def;
    return as_integer(*v, key_path(key));
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(key_path(key), std::string("expected a boolean, got ") + type_name(*v));
    return v->get<bool>();
  }

  std::string text(const std::string& key, const std::string& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(key_path(key), std::string("expected a string, got ") + type_name(*v));
    return v->get<std::string>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

  static long long as_integer(const json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    throw ConfigError(path, std::string("expected an integer, got ") + type_name(v));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T, class Fn>
std::vector<T> list_of(const json* v, const std::string& path, Fn&& item, bool allow_scalar) {
  std::vector<T> out;
  if (!v) return out;
  if (!v->is_array()) {
    if (allow_scalar) {
      out.push_back(item(*v, path));
      return out;
    }
    throw ConfigError(path, std::string("expected an array, got ") + type_name(*v));
  }
  for (std::size_t i = 0; i < v->size(); ++i) out.push_back(item((*v)[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, std::string("expected a number, got ") + type_name(v));
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) { return static_cast<int>(Section::as_integer(v, path)); }

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace

Constellation FormatSpec::build() const {
  Constellation c = build_qam(order);
  if (entropy_bits > 0.0) c = shape_mb(c, entropy_bits);
  return c;
}

ScmPlan PlanSpec::make(int n_sc) const {
  ScmPlan p = ScmPlan::make(n_channels, n_sc, rolloff, total_baud, channel_spacing, rate_margin);
  if (samples_per_symbol > 0) p.samples_per_symbol = samples_per_symbol;
  p.filter_span = filter_span;
  p.tx_sps = tx_sps;
  p.validate();
  return p;
}

std::size_t ExperimentConfig::symbols_for(int n_sc) const {
  const auto it = symbols.find(n_sc);
  if (it != symbols.end()) return it->second;
  const auto def = symbols.find(0);
  if (def == symbols.end()) {
    throw ConfigError("symbols.per_subcarrier", "no symbol count for " + std::to_string(n_sc) + " subcarriers");
  }
  return def->second;
}

void ExperimentConfig::validate() const {
  require(plan.n_channels >= 1, "plan.n_channels", "must be >= 1");
  require(!plan.n_subcarriers.empty(), "plan.n_subcarriers", "must not be empty");
  for (int n : plan.n_subcarriers) {
    require(n >= 1, "plan.n_subcarriers", "entries must be >= 1");
    try {
      plan.make(n);
    } catch (const InvalidArgument& e) {
      throw ConfigError("plan", e.what());
    }
    require(symbols_for(n) > 2 * kBoundarySymbols + warmup, "symbols.per_subcarrier",
            "too few symbols after boundary trimming and warmup");
  }
  require(link.n_spans >= 1, "link.n_spans", "must be >= 1");
  try {
    link.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("link", e.what());
  }
  require(!formats.empty(), "constellation.formats", "must not be empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < formats.size(); ++i) {
    const std::string p = "constellation.formats[" + std::to_string(i) + "]";
    require(!formats[i].name.empty(), p + ".name", "must not be empty");
    require(formats[i].name.find_first_of("/\\ ") == std::string::npos, p + ".name", "must be a plain file name");
    require(names.insert(formats[i].name).second, p + ".name", "duplicate format name");
    try {
      formats[i].build();
    } catch (const std::exception& e) {
      throw ConfigError(p, e.what());
    }
  }
  require(!power_dbm_per_channel.empty(), "power.dbm_per_channel", "must not be empty");
  for (int s : span_checkpoints) {
    require(s >= 1 && s <= link.n_spans, "cov.span_checkpoints", "entries must lie in [1, link.n_spans]");
  }
  require(bootstrap_block >= 1, "cov.bootstrap_block", "must be >= 1");
  require(!lambdas.empty(), "equalizer.lambdas", "must not be empty");
  for (double l : lambdas) require(l > 0.0 && l <= 1.0, "equalizer.lambdas", "entries must lie in (0, 1]");
  require(step.max_nl_phase > 0.0, "step.max_nl_phase", "must be > 0");
  require(step.min_steps_per_span >= 1, "step.min_steps_per_span", "must be >= 1");
  require(tensor.nodes_per_span >= 1, "model.nodes_per_span", "must be >= 1");
  require(tensor.sps >= 2, "model.tensor_sps", "must be >= 2");
  require(mc_symbols >= 2, "model.mc_symbols", "must be >= 2");
  for (const auto& id : mc_interferers) {
    require(id.channel >= 0 && id.channel < plan.n_channels, "model.mc_interferers", "channel out of range");
    for (int n : plan.n_subcarriers) {
      require(id.subcarrier >= 0 && id.subcarrier < n, "model.mc_interferers", "subcarrier out of range");
    }
  }
  require(threads >= 1, "threads", "must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "");

  {
    Section s = top.sub("plan");
    auto& p = cfg.plan;
    p.n_channels = static_cast<int>(s.integer("n_channels", p.n_channels));
    if (const json* v = s.find("n_subcarriers")) p.n_subcarriers = list_of<int>(v, s.key_path("n_subcarriers"), as_int, true);
    p.rolloff = s.number("rolloff", p.rolloff);
    p.total_baud = s.number("total_baud_hz", p.total_baud);
    p.channel_spacing = s.number("channel_spacing_hz", p.channel_spacing);
    p.rate_margin = s.number("rate_margin", p.rate_margin);
    p.samples_per_symbol = static_cast<int>(s.integer("samples_per_symbol", p.samples_per_symbol));
    p.filter_span = static_cast<int>(s.integer("filter_span", p.filter_span));
    p.tx_sps = static_cast<int>(s.integer("tx_sps", p.tx_sps));
    s.finish();
  }
  {
    Section s = top.sub("link");
    auto& l = cfg.link;
    l.n_spans = static_cast<int>(s.integer("n_spans", l.n_spans));
    l.fiber.alpha_db_per_km = s.number("alpha_db_per_km", l.fiber.alpha_db_per_km);
    l.fiber.beta2_ps2_per_km = s.number("beta2_ps2_per_km", l.fiber.beta2_ps2_per_km);
    l.fiber.gamma_per_w_km = s.number("gamma_per_w_km", l.fiber.gamma_per_w_km);
    l.fiber.span_length_km = s.number("span_length_km", l.fiber.span_length_km);
    l.amp_noise_figure_db = s.number("noise_figure_db", l.amp_noise_figure_db);
    l.ase_enabled = s.boolean("ase", l.ase_enabled);
    s.finish();
  }
  {
    Section s = top.sub("constellation");
    if (const json* v = s.find("formats")) {
      cfg.formats = list_of<FormatSpec>(
          v, s.key_path("formats"),
          [](const json& item, const std::string& path) {
            Section f(item, path);
            FormatSpec spec;
            spec.order = static_cast<int>(f.integer("order", spec.order));
            spec.entropy_bits = f.number("entropy_bits", spec.entropy_bits);
            spec.name = f.text("name", "");
            if (spec.name.empty()) {
              std::ostringstream n;
              n << spec.order << "qam";
              if (spec.entropy_bits > 0.0) n << "_mb" << spec.entropy_bits;
              spec.name = n.str();
            }
            f.finish();
            return spec;
          },
          false);
    }
    s.finish();
  }
  {
    Section s = top.sub("power");
    if (const json* v = s.find("dbm_per_channel")) {
      const std::string path = s.key_path("dbm_per_channel");
      if (v->is_object()) {
        Section r(*v, path);
        const double start = r.number("start", 0.0);
        const double stop = r.number("stop", start);
        const double step = r.number("step", 1.0);
        r.finish();
        require(step > 0.0 && stop >= start, path, "range needs step > 0 and stop >= start");
        cfg.power_dbm_per_channel.clear();
        const auto n = static_cast<int>(std::floor((stop - start) / step + 1e-9));
        for (int i = 0; i <= n; ++i) cfg.power_dbm_per_channel.push_back(start + i * step);
      } else {
        cfg.power_dbm_per_channel = list_of<double>(v, path, as_number, true);
      }
    }
    s.finish();
  }
  {
    Section s = top.sub("symbols");
    if (const json* v = s.find("per_subcarrier")) {
      const std::string path = s.key_path("per_subcarrier");
      cfg.symbols.clear();
      if (v->is_object()) {
        for (auto it = v->begin(); it != v->end(); ++it) {
          int key = 0;
          if (it.key() != "default") {
            try {
              std::size_t used = 0;
              key = std::stoi(it.key(), &used);
              if (used != it.key().size() || key < 1) throw std::invalid_argument("key");
            } catch (const std::exception&) {
              throw ConfigError(path + "." + it.key(), "keys must be subcarrier counts or 'default'");
            }
          }
          const long long n = Section::as_integer(it.value(), path + "." + it.key());
          require(n >= 1, path + "." + it.key(), "must be >= 1");
          cfg.symbols[key] = static_cast<std::size_t>(n);
        }
      } else {
        const long long n = Section::as_integer(*v, path);
        require(n >= 1, path, "must be >= 1");
        cfg.symbols[0] = static_cast<std::size_t>(n);
      }
    }
    s.finish();
  }
  {
    Section s = top.sub("seeds");
    cfg.symbol_seed = static_cast<std::uint64_t>(s.integer("symbols", static_cast<long long>(cfg.symbol_seed)));
    cfg.ase_seed = static_cast<std::uint64_t>(s.integer("ase", static_cast<long long>(cfg.ase_seed)));
    cfg.bootstrap_seed = static_cast<std::uint64_t>(s.integer("bootstrap", static_cast<long long>(cfg.bootstrap_seed)));
    cfg.mc_seed = static_cast<std::uint64_t>(s.integer("mc", static_cast<long long>(cfg.mc_seed)));
    s.finish();
  }
  cfg.link.ase_seed = cfg.ase_seed;
  {
    Section s = top.sub("step");
    cfg.step.max_nl_phase = s.number("max_nl_phase", cfg.step.max_nl_phase);
    cfg.step.min_steps_per_span = static_cast<int>(s.integer("min_steps_per_span", cfg.step.min_steps_per_span));
    cfg.step.uniform_steps = static_cast<int>(s.integer("uniform_steps", cfg.step.uniform_steps));
    s.finish();
  }
  {
    Section s = top.sub("cov");
    if (const json* v = s.find("span_checkpoints")) {
      cfg.span_checkpoints = list_of<int>(v, s.key_path("span_checkpoints"), as_int, true);
    }
    cfg.bootstrap_replicates = static_cast<int>(s.integer("bootstrap_replicates", cfg.bootstrap_replicates));
    cfg.bootstrap_block = static_cast<std::size_t>(s.integer("bootstrap_block", static_cast<long long>(cfg.bootstrap_block)));
    s.finish();
  }
  {
    Section s = top.sub("equalizer");
    if (const json* v = s.find("lambdas")) cfg.lambdas = list_of<double>(v, s.key_path("lambdas"), as_number, true);
    if (const json* v = s.find("modes")) {
      cfg.modes = list_of<EqMode>(
          v, s.key_path("modes"),
          [](const json& item, const std::string& path) {
            if (!item.is_string()) throw ConfigError(path, "expected a mode name");
            try {
              return parse_eq_mode(item.get<std::string>());
            } catch (const InvalidArgument& e) {
              throw ConfigError(path, e.what());
            }
          },
          true);
    }
    cfg.warmup = static_cast<std::size_t>(s.integer("warmup", static_cast<long long>(cfg.warmup)));
    s.finish();
  }
  {
    Section s = top.sub("model");
    const std::string set = s.text("interferers", "all");
    if (set == "all") {
      cfg.interferer_set = InterfererSet::kAll;
    } else if (set == "external") {
      cfg.interferer_set = InterfererSet::kExternalOnly;
    } else {
      throw ConfigError(s.key_path("interferers"), "expected 'all' or 'external'");
    }
    cfg.tensor.K = static_cast<int>(s.integer("K", cfg.tensor.K));
    cfg.tensor.nodes_per_span = static_cast<int>(s.integer("nodes_per_span", cfg.tensor.nodes_per_span));
    cfg.tensor.sps = static_cast<int>(s.integer("tensor_sps", cfg.tensor.sps));
    cfg.tensor.pulse_radius = static_cast<int>(s.integer("pulse_radius", cfg.tensor.pulse_radius));
    cfg.tensor.window_radius = static_cast<int>(s.integer("window_radius", cfg.tensor.window_radius));
    cfg.mc_symbols = static_cast<std::size_t>(s.integer("mc_symbols", static_cast<long long>(cfg.mc_symbols)));
    if (const json* v = s.find("mc_interferers")) {
      cfg.mc_interferers = list_of<InterfererId>(
          v, s.key_path("mc_interferers"),
          [](const json& item, const std::string& path) {
            if (!item.is_array() || item.size() != 2) throw ConfigError(path, "expected [channel, subcarrier]");
            return InterfererId{as_int(item[0], path + "[0]"), as_int(item[1], path + "[1]")};
          },
          false);
    }
    s.finish();
  }
  cfg.threads = static_cast<int>(top.integer("threads", cfg.threads));
  {
    Section s = top.sub("output");
    cfg.output_dir = s.text("dir", cfg.output_dir.string());
    s.finish();
  }
  top.finish();

  if (cfg.span_checkpoints.empty()) cfg.span_checkpoints.push_back(cfg.link.n_spans);
  std::sort(cfg.span_checkpoints.begin(), cfg.span_checkpoints.end());
  cfg.span_checkpoints.erase(std::unique(cfg.span_checkpoints.begin(), cfg.span_checkpoints.end()),
                             cfg.span_checkpoints.end());
  cfg.validate();
  if (cfg.span_checkpoints.back() != cfg.link.n_spans) cfg.span_checkpoints.push_back(cfg.link.n_spans);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string effective_config_json(const ExperimentConfig& cfg) {
  json j;
  j["plan"] = {{"n_channels", cfg.plan.n_channels},
               {"n_subcarriers", cfg.plan.n_subcarriers},
               {"rolloff", cfg.plan.rolloff},
               {"total_baud_hz", cfg.plan.total_baud},
               {"channel_spacing_hz", cfg.plan.channel_spacing},
               {"rate_margin", cfg.plan.rate_margin},
               {"samples_per_symbol", cfg.plan.samples_per_symbol},
               {"filter_span", cfg.plan.filter_span},
               {"tx_sps", cfg.plan.tx_sps}};
  j["link"] = {{"n_spans", cfg.link.n_spans},
               {"alpha_db_per_km", cfg.link.fiber.alpha_db_per_km},
               {"beta2_ps2_per_km", cfg.link.fiber.beta2_ps2_per_km},
               {"gamma_per_w_km", cfg.link.fiber.gamma_per_w_km},
               {"span_length_km", cfg.link.fiber.span_length_km},
               {"noise_figure_db", cfg.link.amp_noise_figure_db},
               {"ase", cfg.link.ase_enabled}};
  json formats = json::array();
  for (const auto& f : cfg.formats) {
    formats.push_back({{"name", f.name}, {"order", f.order}, {"entropy_bits", f.entropy_bits}});
  }
  j["constellation"] = {{"formats", formats}};
  j["power"] = {{"dbm_per_channel", cfg.power_dbm_per_channel}};
  json sym = json::object();
  for (const auto& [k, v] : cfg.symbols) sym[k == 0 ? "default" : std::to_string(k)] = v;
  j["symbols"] = {{"per_subcarrier", sym}};
  j["seeds"] = {{"symbols", cfg.symbol_seed},
                {"ase", cfg.ase_seed},
                {"bootstrap", cfg.bootstrap_seed},
                {"mc", cfg.mc_seed}};
  j["step"] = {{"max_nl_phase", cfg.step.max_nl_phase},
               {"min_steps_per_span", cfg.step.min_steps_per_span},
               {"uniform_steps", cfg.step.uniform_steps}};
  j["cov"] = {{"span_checkpoints", cfg.span_checkpoints},
              {"bootstrap_replicates", cfg.bootstrap_replicates},
              {"bootstrap_block", cfg.bootstrap_block}};
  json modes = json::array();
  for (auto m : cfg.modes) modes.push_back(to_string(m));
  j["equalizer"] = {{"lambdas", cfg.lambdas}, {"modes", modes}, {"warmup", cfg.warmup}};
  json mc = json::array();
  for (const auto& id : cfg.mc_interferers) mc.push_back({id.channel, id.subcarrier});
  j["model"] = {{"interferers", cfg.interferer_set == InterfererSet::kAll ? "all" : "external"},
                {"K", cfg.tensor.K},
                {"nodes_per_span", cfg.tensor.nodes_per_span},
                {"tensor_sps", cfg.tensor.sps},
                {"pulse_radius", cfg.tensor.pulse_radius},
                {"window_radius", cfg.tensor.window_radius},
                {"mc_symbols", cfg.mc_symbols},
                {"mc_interferers", mc}};
  j["threads"] = cfg.threads;
  j["output"] = {{"dir", cfg.output_dir.string()}};
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Output location and worker count do not change results.
  ExperimentConfig c = cfg;
  c.output_dir = "";
  c.threads = 1;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : effective_config_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void override_seeds(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.symbol_seed = seed;
  cfg.ase_seed = derive_seed(seed, 1);
  cfg.bootstrap_seed = derive_seed(seed, 2);
  cfg.mc_seed = derive_seed(seed, 3);
  cfg.link.ase_seed = cfg.ase_seed;
}

}  // namespace nlpn
