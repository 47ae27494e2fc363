#include "hlsf/config.hpp"

#include <fstream>
#include <sstream>

namespace hlsf {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError("config key " + key + ": expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError("config key " + key + ": expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": expected boolean, got '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw ConfigError("config key " + key + ": expected unsigned integer, got '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int line_number = 0;
  while (std::getline(ss, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_number) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_kv_text(buffer.str());
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  ModelConfig& m = cfg.model;
  TrainConfig& t = cfg.train;
  SynthSpec& g = cfg.synth;

  if (key == "M") m.M = to_int(key, value);
  else if (key == "D") m.D = to_int(key, value);
  else if (key == "F") m.F = to_int(key, value);
  else if (key == "H") { m.H = to_int(key, value); g.H = m.H; }
  else if (key == "T") { m.T = to_int(key, value); g.T = m.T; }
  else if (key == "tau") m.tau = to_double(key, value);
  else if (key == "k_rounds") m.k_rounds = to_int(key, value);
  else if (key == "psi") { m.psi = to_double(key, value); g.psi = m.psi; }
  else if (key == "seed") { m.seed = to_u64(key, value); g.seed = m.seed; }
  else if (key == "mask_fake") m.mask_fake = to_bool(key, value);
  else if (key == "categorical_bce") m.categorical_bce = to_bool(key, value);
  else if (key == "dims.history_embed") m.dims.history_embed = to_int(key, value);
  else if (key == "dims.history_hidden") m.dims.history_hidden = to_int(key, value);
  else if (key == "dims.lane_embed") m.dims.lane_embed = to_int(key, value);
  else if (key == "dims.lane_hidden") m.dims.lane_hidden = to_int(key, value);
  else if (key == "dims.message") m.dims.message = to_int(key, value);
  else if (key == "dims.node_hidden") m.dims.node_hidden = to_int(key, value);
  else if (key == "dims.mode_embed") m.dims.mode_embed = to_int(key, value);
  else if (key == "dims.decoder_embed") m.dims.decoder_embed = to_int(key, value);
  else if (key == "dims.decoder_hidden") m.dims.decoder_hidden = to_int(key, value);
  else if (key == "dims.att_hidden") m.dims.att_hidden = to_int(key, value);
  else if (key == "dims.head_hidden") m.dims.head_hidden = to_int(key, value);
  else if (key == "dims.disc_embed") m.dims.disc_embed = to_int(key, value);
  else if (key == "dims.disc_hidden") m.dims.disc_hidden = to_int(key, value);
  else if (key == "flags.pdp") m.flags.pdp = to_bool(key, value);
  else if (key == "flags.vli") m.flags.vli = to_bool(key, value);
  else if (key == "flags.v2i") m.flags.v2i = to_bool(key, value);
  else if (key == "flags.gan") m.flags.gan = to_bool(key, value);
  else if (key == "recipe") t.recipe = recipe_from_string(value);
  else if (key == "lr") t.lr = to_double(key, value);
  else if (key == "batch") t.batch = to_int(key, value);
  else if (key == "epochs") t.epochs = to_int(key, value);
  else if (key == "val_every") t.val_every = to_int(key, value);
  else if (key == "alpha") t.alpha = to_double(key, value);
  else if (key == "kappa") t.kappa = to_double(key, value);
  else if (key == "beta_max") t.beta_max = to_double(key, value);
  else if (key == "cycles") t.cycles = to_int(key, value);
  else if (key == "ramp") t.ramp = to_double(key, value);
  else if (key == "clip") t.clip = to_double(key, value);
  else if (key == "val_fraction") t.val_fraction = to_double(key, value);
  else if (key == "val_k") t.val_k = to_int(key, value);
  else if (key == "templates") g.templates = split_list(value);
  else if (key == "n") g.count = to_int(key, value);
  else if (key == "noise_lat") g.noise_lat = to_double(key, value);
  else if (key == "noise_lon") g.noise_lon = to_double(key, value);
  else if (key == "fork_p0") g.fork_p0 = to_double(key, value);
  else if (key == "fork_p1") g.fork_p1 = to_double(key, value);
  else if (key == "fork_p2") g.fork_p2 = to_double(key, value);
  else if (key == "frac_ambiguous") g.frac_ambiguous = to_double(key, value);
  else if (key == "min_neighbors") g.min_neighbors = to_int(key, value);
  else if (key == "max_neighbors") g.max_neighbors = to_int(key, value);
  else if (key == "profile") apply_profile(g, value);
  else if (key == "K") cfg.K = to_int(key, value);
  else if (key == "predict_mode") {
    if (value != "multi" && value != "single")
      throw ConfigError("config key predict_mode: expected multi or single");
    cfg.predict_mode = value;
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

void apply_all(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  // Recipe first so explicit flag keys can override it.
  const auto r = kv.find("recipe");
  if (r != kv.end()) {
    cfg.train.recipe = recipe_from_string(r->second);
    cfg.model = apply_recipe(cfg.model, cfg.train.recipe);
  }
  for (const auto& [k, v] : kv) {
    if (k == "recipe") continue;
    apply_key(cfg, k, v);
  }
}

std::map<std::string, std::string> model_config_to_kv(const ModelConfig& m) {
  std::map<std::string, std::string> kv;
  auto put_i = [&](const char* k, long long v) { kv[k] = std::to_string(v); };
  auto put_d = [&](const char* k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    kv[k] = buf;
  };
  auto put_b = [&](const char* k, bool v) { kv[k] = v ? "true" : "false"; };
  put_i("M", m.M);
  put_i("D", m.D);
  put_i("F", m.F);
  put_i("H", m.H);
  put_i("T", m.T);
  put_d("tau", m.tau);
  put_i("k_rounds", m.k_rounds);
  put_d("psi", m.psi);
  kv["seed"] = std::to_string(m.seed);
  put_b("mask_fake", m.mask_fake);
  put_b("categorical_bce", m.categorical_bce);
  put_b("single_context", m.single_context);
  put_i("bom_samples", m.bom_samples);
  put_b("flags.pdp", m.flags.pdp);
  put_b("flags.vli", m.flags.vli);
  put_b("flags.v2i", m.flags.v2i);
  put_b("flags.gan", m.flags.gan);
  put_i("dims.history_embed", m.dims.history_embed);
  put_i("dims.history_hidden", m.dims.history_hidden);
  put_i("dims.lane_embed", m.dims.lane_embed);
  put_i("dims.lane_hidden", m.dims.lane_hidden);
  put_i("dims.message", m.dims.message);
  put_i("dims.node_hidden", m.dims.node_hidden);
  put_i("dims.mode_embed", m.dims.mode_embed);
  put_i("dims.decoder_embed", m.dims.decoder_embed);
  put_i("dims.decoder_hidden", m.dims.decoder_hidden);
  put_i("dims.att_hidden", m.dims.att_hidden);
  put_i("dims.head_hidden", m.dims.head_hidden);
  put_i("dims.disc_embed", m.dims.disc_embed);
  put_i("dims.disc_hidden", m.dims.disc_hidden);
  return kv;
}

ModelConfig model_config_from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig m;
  auto get = [&](const char* k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(std::string("checkpoint config missing key: ") + k);
    return it->second;
  };
  m.M = to_int("M", get("M"));
  m.D = to_int("D", get("D"));
  m.F = to_int("F", get("F"));
  m.H = to_int("H", get("H"));
  m.T = to_int("T", get("T"));
  m.tau = to_double("tau", get("tau"));
  m.k_rounds = to_int("k_rounds", get("k_rounds"));
  m.psi = to_double("psi", get("psi"));
  m.seed = to_u64("seed", get("seed"));
  m.mask_fake = to_bool("mask_fake", get("mask_fake"));
  m.categorical_bce = to_bool("categorical_bce", get("categorical_bce"));
  m.single_context = to_bool("single_context", get("single_context"));
  m.bom_samples = to_int("bom_samples", get("bom_samples"));
  m.flags.pdp = to_bool("flags.pdp", get("flags.pdp"));
  m.flags.vli = to_bool("flags.vli", get("flags.vli"));
  m.flags.v2i = to_bool("flags.v2i", get("flags.v2i"));
  m.flags.gan = to_bool("flags.gan", get("flags.gan"));
  m.dims.history_embed = to_int("d", get("dims.history_embed"));
  m.dims.history_hidden = to_int("d", get("dims.history_hidden"));
  m.dims.lane_embed = to_int("d", get("dims.lane_embed"));
  m.dims.lane_hidden = to_int("d", get("dims.lane_hidden"));
  m.dims.message = to_int("d", get("dims.message"));
  m.dims.node_hidden = to_int("d", get("dims.node_hidden"));
  m.dims.mode_embed = to_int("d", get("dims.mode_embed"));
  m.dims.decoder_embed = to_int("d", get("dims.decoder_embed"));
  m.dims.decoder_hidden = to_int("d", get("dims.decoder_hidden"));
  m.dims.att_hidden = to_int("d", get("dims.att_hidden"));
  m.dims.head_hidden = to_int("d", get("dims.head_hidden"));
  m.dims.disc_embed = to_int("d", get("dims.disc_embed"));
  m.dims.disc_hidden = to_int("d", get("dims.disc_hidden"));
  m.validate();
  return m;
}

std::string run_config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : model_config_to_kv(cfg.model)) {
    if (k == "single_context" || k == "bom_samples") continue;  // recipe-derived
    out << k << " = " << v << '\n';
  }
  const TrainConfig& t = cfg.train;
  out << "recipe = " << recipe_to_string(t.recipe) << '\n';
  char buf[64];
  auto put_d = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << k << " = " << buf << '\n';
  };
  put_d("lr", t.lr);
  out << "batch = " << t.batch << '\n';
  out << "epochs = " << t.epochs << '\n';
  out << "val_every = " << t.val_every << '\n';
  put_d("alpha", t.alpha);
  put_d("kappa", t.kappa);
  put_d("beta_max", t.beta_max);
  out << "cycles = " << t.cycles << '\n';
  put_d("ramp", t.ramp);
  put_d("clip", t.clip);
  put_d("val_fraction", t.val_fraction);
  out << "val_k = " << t.val_k << '\n';
  out << "K = " << cfg.K << '\n';
  out << "predict_mode = " << cfg.predict_mode << '\n';
  return out.str();
}

}  // namespace hlsf
