#include "engsf/harness/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "engsf/core/error.hpp"

namespace engsf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct Entry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line;
};

std::vector<Entry> tokenize(const std::string& text) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError(lineno, "malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(lineno, "expected 'key = value', got '" + line + "'");
    }
    if (section.empty()) {
      throw ParseError(lineno, "key outside any [section]");
    }
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) throw ParseError(lineno, "empty key");
    if (e.value.empty()) throw ParseError(lineno, "empty value for '" + e.key + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

double to_double(const Entry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    throw ParseError(e.line, "'" + e.value + "' is not a number");
  }
}

std::size_t to_size(const Entry& e) {
  std::size_t v = 0;
  const auto* begin = e.value.data();
  const auto* end = begin + e.value.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ParseError(e.line, "'" + e.value + "' is not a nonnegative integer");
  }
  return v;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) parts.push_back(trim(cur));
  return parts;
}

Vec to_double_list(const Entry& e, std::size_t expected) {
  const auto parts = split_commas(e.value);
  if (parts.size() != expected) {
    throw ParseError(e.line, "expected " + std::to_string(expected) +
                                 " comma-separated values");
  }
  Vec out;
  for (const auto& p : parts) {
    Entry tmp{e.section, e.key, p, e.line};
    out.push_back(to_double(tmp));
  }
  return out;
}

std::vector<std::uint64_t> to_seed_list(const Entry& e) {
  const auto parts = split_commas(e.value);
  std::vector<std::uint64_t> out;
  for (const auto& p : parts) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(p.data(), p.data() + p.size(), v);
    if (res.ec != std::errc() || res.ptr != p.data() + p.size()) {
      throw ParseError(e.line, "seed '" + p + "' is not a nonnegative integer");
    }
    out.push_back(v);
  }
  return out;
}

bool is(const Entry& e, const char* section, const char* key) {
  return e.section == section && e.key == key;
}

bool one_of(const std::string& name, std::initializer_list<const char*> opts) {
  for (const char* o : opts) {
    if (name == o) return true;
  }
  return false;
}

// Applies one entry; returns false when the key does not exist for this
// experiment (caller turns that into a ParseError with the line number).
bool apply_entry(ExperimentConfig& c, const Entry& e) {
  const std::string& ex = c.name;
  if (is(e, "experiment", "name")) return true;  // consumed in the pre-pass
  if (is(e, "experiment", "seeds")) {
    c.seeds = to_seed_list(e);
    return true;
  }
  if (is(e, "experiment", "out_dir")) {
    c.out_dir = e.value;
    return true;
  }

  if (is(e, "filter", "kind")) {
    if (e.value == "engsf") c.filter = FilterKind::Engsf;
    else if (e.value == "enkf") c.filter = FilterKind::Enkf;
    else if (e.value == "ensrf") c.filter = FilterKind::Ensrf;
    else if (e.value == "sir") c.filter = FilterKind::Sir;
    else throw ParseError(e.line, "unknown filter kind '" + e.value + "'");
    return true;
  }
  if (is(e, "filter", "N")) {
    c.n_particles = to_size(e);
    return true;
  }
  if (is(e, "filter", "bandwidth")) {
    if (e.value == "silverman") c.bandwidth = BandwidthRule::Silverman;
    else if (e.value == "modified") c.bandwidth = BandwidthRule::Modified;
    else if (e.value == "silverman-exact-c") c.bandwidth = BandwidthRule::SilvermanExactC;
    else throw ParseError(e.line, "unknown bandwidth rule '" + e.value + "'");
    return true;
  }
  if (is(e, "filter", "enkf_variant")) {
    if (e.value == "perturbed-obs") c.enkf_variant = EnkfVariant::PerturbedObs;
    else if (e.value == "split-mean") c.enkf_variant = EnkfVariant::SplitMean;
    else throw ParseError(e.line, "unknown enkf variant '" + e.value + "'");
    return true;
  }

  if (e.section == "model") {
    if (e.key == "grid_points" && one_of(ex, {"ex1", "ex2"})) {
      c.grid_points = to_size(e);
      return true;
    }
    if (e.key == "grid_lo" && one_of(ex, {"ex1", "ex2"})) {
      c.grid_lo = to_double(e);
      return true;
    }
    if (e.key == "grid_hi" && one_of(ex, {"ex1", "ex2"})) {
      c.grid_hi = to_double(e);
      return true;
    }
    if (e.key == "datum" && ex == "ex1") { c.datum = to_double(e); return true; }
    if (e.key == "likelihood_var" && ex == "ex1") {
      c.likelihood_var = to_double(e);
      return true;
    }
    if (e.key == "prior_mode" && ex == "ex1") { c.prior_mode = to_double(e); return true; }
    if (e.key == "prior_var" && ex == "ex1") { c.prior_var = to_double(e); return true; }
    if (e.key == "dt" && one_of(ex, {"ex2", "ex3", "ex4"})) {
      c.dt = to_double(e);
      return true;
    }
    if (e.key == "kappa" && ex == "ex2") { c.kappa = to_double(e); return true; }
    if (e.key == "u0" && ex == "ex2") { c.u0 = to_double(e); return true; }
    if (e.key == "gamma" && ex == "ex3") { c.l63.gamma = to_double(e); return true; }
    if (e.key == "rho" && ex == "ex3") { c.l63.rho = to_double(e); return true; }
    if (e.key == "beta" && ex == "ex3") { c.l63.beta = to_double(e); return true; }
    if (e.key == "noise_var" && ex == "ex3") {
      c.l63_noise_var = to_double_list(e, 3);
      return true;
    }
    if (e.key == "x0" && ex == "ex3") { c.l63_x0 = to_double_list(e, 3); return true; }
    if (e.key == "dim" && ex == "ex4") { c.l95_dim = to_size(e); return true; }
    if (e.key == "forcing" && ex == "ex4") { c.forcing = to_double(e); return true; }
    if (e.key == "noise_var" && ex == "ex4") {
      c.l95_noise_var = to_double(e);
      return true;
    }
    if (e.key == "init_mean" && ex == "ex4") { c.init_mean = to_double(e); return true; }
    if (e.key == "init_var" && one_of(ex, {"ex2", "ex3", "ex4"})) {
      c.init_var = to_double(e);
      return true;
    }
    return false;
  }

  if (e.section == "obs" && one_of(ex, {"ex2", "ex3", "ex4"})) {
    if (e.key == "interval") { c.obs_interval = to_size(e); return true; }
    if (e.key == "noise_var") { c.obs_noise_var = to_double(e); return true; }
    return false;
  }

  if (e.section == "run" && one_of(ex, {"ex2", "ex3", "ex4"})) {
    if (e.key == "steps") { c.steps = to_size(e); return true; }
    if (e.key == "truth_spinup") { c.truth_spinup = to_size(e); return true; }
    if (e.key == "metric_spinup") { c.metric_spinup = to_size(e); return true; }
    if (e.key == "density_time" && ex == "ex2") {
      c.density_time = to_double(e);
      return true;
    }
    if (e.key == "kl_reference" && ex == "ex2") {
      c.kl_reference = to_size(e);
      return true;
    }
    return false;
  }

  return false;
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ValidationError(field, message);
}

}  // namespace

const char* filter_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::Engsf: return "engsf";
    case FilterKind::Enkf: return "enkf";
    case FilterKind::Ensrf: return "ensrf";
    case FilterKind::Sir: return "sir";
  }
  return "unknown";
}

const char* bandwidth_name(BandwidthRule rule) {
  switch (rule) {
    case BandwidthRule::Silverman: return "silverman";
    case BandwidthRule::Modified: return "modified";
    case BandwidthRule::SilvermanExactC: return "silverman-exact-c";
  }
  return "unknown";
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.name = experiment;
  c.out_dir = "runs/" + experiment;
  if (experiment == "ex1") {
    c.n_particles = 200;
  } else if (experiment == "ex2") {
    c.n_particles = 100;
    c.dt = 0.01;
    c.obs_interval = 50;
    c.obs_noise_var = 0.1;
    c.steps = 1000;
    c.init_var = 0.25;
    c.grid_points = 1201;
    c.grid_lo = -3.0;
    c.grid_hi = 3.0;
  } else if (experiment == "ex3") {
    c.n_particles = 200;
    c.dt = 0.01;
    c.obs_interval = 50;
    c.obs_noise_var = 6.25;
    c.steps = 10000;
    c.init_var = 4.0;
  } else if (experiment == "ex4") {
    c.n_particles = 100;
    c.dt = 0.01;
    c.obs_interval = 5;
    c.obs_noise_var = 2.0;
    c.steps = 500;
    c.truth_spinup = 200;
    c.metric_spinup = 20;
    c.init_var = 2.0;
  } else {
    throw ValidationError("name", "unknown experiment '" + experiment +
                                      "' (expected ex1, ex2, ex3, or ex4)");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  const std::vector<Entry> entries = tokenize(text);
  std::string name;
  for (const Entry& e : entries) {
    if (is(e, "experiment", "name")) {
      name = e.value;
      break;
    }
  }
  if (name.empty()) {
    throw ValidationError("name", "config must set name under [experiment]");
  }
  ExperimentConfig c = default_config(name);
  for (const Entry& e : entries) {
    if (!apply_entry(c, e)) {
      throw ParseError(e.line, "unknown key '" + e.section + "." + e.key +
                                   "' for experiment " + name);
    }
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const ExperimentConfig& c) {
  require(one_of(c.name, {"ex1", "ex2", "ex3", "ex4"}), "name",
          "unknown experiment '" + c.name + "'");
  require(!c.seeds.empty(), "seeds", "at least one seed is required");
  require(c.n_particles >= 1, "N", "needs at least one particle");
  require(!c.out_dir.empty(), "out_dir", "must not be empty");
  if (c.name == "ex1" || c.name == "ex2") {
    require(c.grid_points >= 2, "grid_points", "needs at least 2 points");
    require(c.grid_hi > c.grid_lo, "grid_hi", "grid_hi must exceed grid_lo");
  }
  if (c.name == "ex1") {
    require(c.likelihood_var > 0.0, "likelihood_var", "must be positive");
    require(c.prior_var > 0.0, "prior_var", "must be positive");
    return;
  }
  require(c.dt > 0.0, "dt", "must be positive");
  require(c.obs_interval >= 1, "interval", "must be at least 1");
  require(c.obs_noise_var > 0.0, "noise_var", "must be positive");
  require(c.steps >= c.obs_interval, "steps",
          "must cover at least one observation interval");
  require(c.init_var > 0.0, "init_var", "must be positive");
  const std::size_t cycles = c.steps / c.obs_interval;
  require(c.metric_spinup < cycles, "metric_spinup",
          "excludes every assimilation cycle");
  if (c.name == "ex2") {
    require(c.kappa >= 0.0, "kappa", "must be nonnegative");
    require(c.density_time >= 0.0 &&
                c.density_time <= static_cast<double>(c.steps) * c.dt,
            "density_time", "must lie inside the simulated window");
  }
  if (c.name == "ex3") {
    require(c.l63_noise_var.size() == 3, "noise_var", "needs 3 components");
    for (double v : c.l63_noise_var) {
      require(v >= 0.0, "noise_var", "components must be nonnegative");
    }
    require(c.l63_x0.size() == 3, "x0", "needs 3 components");
  }
  if (c.name == "ex4") {
    require(c.l95_dim >= 4, "dim", "needs at least 4 components");
    require(c.l95_noise_var >= 0.0, "noise_var", "must be nonnegative");
  }
}

}  // namespace engsf
