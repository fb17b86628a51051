#include "hybrid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json evolution_json(const EvolutionConfig& e) {
  return {{"population", e.population},
          {"generations", e.generations},
          {"p_crossover", e.p_crossover},
          {"p_mutation", e.p_mutation},
          {"mix", {{"per_value", e.mix.per_value}, {"block", e.mix.block}, {"full_array", e.mix.full_array}}},
          {"mag_init", e.mag_init},
          {"mag_op", e.mag_op},
          {"full_array_uses_init_mag", e.full_array_uses_init_mag},
          {"parent_fraction", e.parent_fraction},
          {"parents", e.parents},
          {"blocks", e.blocks},
          {"p_value", e.p_value},
          {"threads", e.threads}};
}

void apply_evolution(EvolutionConfig& e, const json& j) {
  const std::string where = "evolution";
  reject_unknown(j, {"population", "generations", "p_crossover", "p_mutation", "mix", "mag_init",
                     "mag_op", "full_array_uses_init_mag", "parent_fraction", "parents", "blocks",
                     "p_value", "threads"},
                 where);
  read(j, "population", e.population, where);
  read(j, "generations", e.generations, where);
  read(j, "p_crossover", e.p_crossover, where);
  read(j, "p_mutation", e.p_mutation, where);
  if (j.contains("mix")) {
    const json& mix = j.at("mix");
    reject_unknown(mix, {"per_value", "block", "full_array"}, "evolution.mix");
    read(mix, "per_value", e.mix.per_value, "evolution.mix");
    read(mix, "block", e.mix.block, "evolution.mix");
    read(mix, "full_array", e.mix.full_array, "evolution.mix");
  }
  read(j, "mag_init", e.mag_init, where);
  read(j, "mag_op", e.mag_op, where);
  read(j, "full_array_uses_init_mag", e.full_array_uses_init_mag, where);
  read(j, "parent_fraction", e.parent_fraction, where);
  read(j, "parents", e.parents, where);
  read(j, "blocks", e.blocks, where);
  read(j, "p_value", e.p_value, where);
  read(j, "threads", e.threads, where);
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  return {{"method", method_name(cfg.method)},
          {"seed", t.seed},
          {"seeds", cfg.seeds},
          {"jobs", cfg.jobs},
          {"train",
           {{"n", t.warmup_epochs},
            {"y", t.evolution_period},
            {"max_epochs", t.max_epochs},
            {"learning_rate", t.learning_rate},
            {"batch_size", t.batch_size}}},
          {"evolution", evolution_json(t.evolution)},
          {"data",
           {{"source", cfg.data.source},
            {"subset", cfg.data.subset},
            {"split",
             {{"train", cfg.data.split.train_fraction},
              {"validation", cfg.data.split.validation_fraction},
              {"test", cfg.data.split.test_fraction},
              {"stratified", cfg.data.split.stratified},
              {"seed", cfg.data.split.seed}}}}}};
}

void apply_json(ExperimentConfig& cfg, const json& j) {
  reject_unknown(j, {"method", "seed", "seeds", "jobs", "train", "evolution", "data"}, "config");
  if (j.contains("method")) {
    std::string method;
    read(j, "method", method, "config");
    cfg.method = parse_method(method);
  }
  read(j, "seed", cfg.train.seed, "config");
  read(j, "seeds", cfg.seeds, "config");
  read(j, "jobs", cfg.jobs, "config");
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"n", "y", "max_epochs", "learning_rate", "batch_size"}, "train");
    read(t, "n", cfg.train.warmup_epochs, "train");
    read(t, "y", cfg.train.evolution_period, "train");
    read(t, "max_epochs", cfg.train.max_epochs, "train");
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read(t, "batch_size", cfg.train.batch_size, "train");
  }
  if (j.contains("evolution")) {
    apply_evolution(cfg.train.evolution, j.at("evolution"));
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, {"source", "subset", "split"}, "data");
    read(d, "source", cfg.data.source, "data");
    read(d, "subset", cfg.data.subset, "data");
    if (d.contains("split")) {
      const json& s = d.at("split");
      reject_unknown(s, {"train", "validation", "test", "stratified", "seed"}, "data.split");
      read(s, "train", cfg.data.split.train_fraction, "data.split");
      read(s, "validation", cfg.data.split.validation_fraction, "data.split");
      read(s, "test", cfg.data.split.test_fraction, "data.split");
      read(s, "stratified", cfg.data.split.stratified, "data.split");
      read(s, "seed", cfg.data.split.seed, "data.split");
    }
  }
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  apply_json(base, j);
  return base;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) {
      continue;
    }
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("synthetic spec: expected key=value, got '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "classes") spec.classes = std::stoul(value);
      else if (key == "per_class") spec.per_class = std::stoul(value);
      else if (key == "channels") spec.channels = std::stoul(value);
      else if (key == "size") spec.height = spec.width = std::stoul(value);
      else if (key == "height") spec.height = std::stoul(value);
      else if (key == "width") spec.width = std::stoul(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw ConfigError("synthetic spec: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("synthetic spec: bad value for '" + key + "'");
    }
  }
  return spec;
}

void check_data_source(const std::string& source) {
  const auto colon = source.find(':');
  const std::string kind = source.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : source.substr(colon + 1);
  if (kind == "cifar10") {
    if (arg.empty()) {
      throw ConfigError("data source cifar10 needs a directory: cifar10:<dir>");
    }
  } else if (kind == "synthetic") {
    parse_synthetic_spec(arg);
  } else {
    throw ConfigError("unknown data source '" + source + "'");
  }
}

Splits load_splits(const DataConfig& cfg) {
  check_data_source(cfg.source);
  Dataset ds;
  const auto colon = cfg.source.find(':');
  const std::string arg = cfg.source.substr(colon + 1);
  if (cfg.source.substr(0, colon) == "cifar10") {
    ds = load_cifar10(arg);
  } else {
    ds = make_synthetic(parse_synthetic_spec(arg));
  }
  if (cfg.subset > 0) {
    ds = stratified_sample(ds, cfg.subset, cfg.split.seed);
  }
  return stratified_split(ds, cfg.split);
}

}  // namespace hybrid
