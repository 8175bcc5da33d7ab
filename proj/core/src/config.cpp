// SPDX-License-Identifier: Apache-2.0
#include "roclab/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "roclab/digest.hpp"

namespace roclab {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Field {
  enum class Type { Size, U64, Double, Bool, String } type;
  void* ptr;
};

using Schema = std::map<std::string, std::map<std::string, Field>>;

Schema make_schema(RunConfig& c) {
  using T = Field::Type;
  return {
      {"dataset",
       {{"classes", {T::Size, &c.dataset.classes}},
        {"image_size", {T::Size, &c.dataset.image_size}},
        {"train", {T::Size, &c.dataset.train}},
        {"eval_per_class", {T::Size, &c.dataset.eval_per_class}},
        {"targets", {T::Size, &c.dataset.targets}},
        {"seed", {T::U64, &c.dataset.seed}}}},
      {"attack",
       {{"kind", {T::String, &c.attack.kind}},
        {"adv_class", {T::Size, &c.attack.adv_class}},
        {"captions_per_target", {T::Size, &c.attack.captions_per_target}},
        {"num_targets", {T::Size, &c.attack.num_targets}},
        {"num_poisons", {T::Size, &c.attack.num_poisons}},
        {"blend_alpha", {T::Double, &c.attack.blend_alpha}},
        {"warp_strength", {T::Double, &c.attack.warp_strength}},
        {"patch_size", {T::Size, &c.attack.patch_size}},
        {"noise_sigma", {T::Double, &c.attack.noise_sigma}},
        {"feature_suppression", {T::Double, &c.attack.feature_suppression}},
        {"rate_ceiling", {T::Double, &c.attack.rate_ceiling}},
        {"adaptive_pairs", {T::String, &c.attack.adaptive_pairs}},
        {"count_per_pair", {T::Size, &c.attack.count_per_pair}},
        {"seed", {T::U64, &c.attack.seed}}}},
      {"defense",
       {{"mode", {T::String, &c.defense.mode}},
        {"pool_fraction", {T::Double, &c.defense.pool_fraction}},
        {"k", {T::Size, &c.defense.k}},
        {"augment", {T::Bool, &c.defense.augment}}}},
      {"train",
       {{"epochs", {T::Size, &c.train.epochs}},
        {"batch", {T::Size, &c.train.batch}},
        {"lr", {T::Double, &c.train.lr}},
        {"hidden_dim", {T::Size, &c.train.hidden_dim}},
        {"feature_dim", {T::Size, &c.train.feature_dim}},
        {"proj_dim", {T::Size, &c.train.proj_dim}},
        {"record_match_trace", {T::Bool, &c.train.record_match_trace}},
        {"seed", {T::U64, &c.train.seed}}}},
      {"eval",
       {{"backdoor_eval_count", {T::Size, &c.eval.backdoor_eval_count}},
        {"probe_train_fraction", {T::Double, &c.eval.probe_train_fraction}},
        {"probe_epochs", {T::Size, &c.eval.probe_epochs}},
        {"probe_lr", {T::Double, &c.eval.probe_lr}},
        {"seed", {T::U64, &c.eval.seed}}}},
      {"output", {{"dir", {T::String, &c.output_dir}}}},
  };
}

void assign(const Field& f, const std::string& section, const std::string& key,
            const std::string& value) {
  std::istringstream in(value);
  auto fail = [&] {
    throw BadConfig("config: bad value for " + section + "." + key + ": '" +
                    value + "'");
  };
  switch (f.type) {
    case Field::Type::Size: {
      long long v;
      if (!(in >> v) || v < 0 || !in.eof()) fail();
      *static_cast<std::size_t*>(f.ptr) = static_cast<std::size_t>(v);
      break;
    }
    case Field::Type::U64: {
      unsigned long long v;
      if (!(in >> v) || !in.eof()) fail();
      *static_cast<std::uint64_t*>(f.ptr) = v;
      break;
    }
    case Field::Type::Double: {
      double v;
      if (!(in >> v) || !in.eof()) fail();
      *static_cast<double*>(f.ptr) = v;
      break;
    }
    case Field::Type::Bool: {
      if (value == "true" || value == "on" || value == "1") {
        *static_cast<bool*>(f.ptr) = true;
      } else if (value == "false" || value == "off" || value == "0") {
        *static_cast<bool*>(f.ptr) = false;
      } else {
        fail();
      }
      break;
    }
    case Field::Type::String:
      *static_cast<std::string*>(f.ptr) = value;
      break;
  }
}

std::string field_to_string(const Field& f) {
  std::ostringstream out;
  switch (f.type) {
    case Field::Type::Size:
      out << *static_cast<const std::size_t*>(f.ptr);
      break;
    case Field::Type::U64:
      out << *static_cast<const std::uint64_t*>(f.ptr);
      break;
    case Field::Type::Double:
      out.precision(17);
      out << *static_cast<const double*>(f.ptr);
      break;
    case Field::Type::Bool:
      out << (*static_cast<const bool*>(f.ptr) ? "true" : "false");
      break;
    case Field::Type::String:
      out << *static_cast<const std::string*>(f.ptr);
      break;
  }
  return out.str();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  Schema schema = make_schema(cfg);

  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw BadConfig("config: malformed section at line " +
                        std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.count(section)) {
        throw BadConfig("config: unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw BadConfig("config: expected 'key = value' at line " +
                      std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& fields = schema.at(section);
    auto it = fields.find(key);
    if (it == fields.end()) {
      throw BadConfig("config: unknown key '" + key + "' in section '" +
                      section + "'");
    }
    assign(it->second, section, key, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string canonical_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Schema schema = make_schema(copy);
  std::ostringstream out;
  for (const auto& [section, fields] : schema) {
    out << "[" << section << "]\n";
    for (const auto& [key, field] : fields) {
      out << key << " = " << field_to_string(field) << "\n";
    }
  }
  return out.str();
}

std::string config_digest(const RunConfig& cfg) {
  return sha256_hex(canonical_config(cfg));
}

void override_seeds(RunConfig& cfg, std::uint64_t seed) {
  cfg.dataset.seed = seed;
  cfg.attack.seed = seed + 1;
  cfg.train.seed = seed + 2;
  cfg.eval.seed = seed + 3;
}

AttackSpec to_attack_spec(const RunConfig& cfg, const Taxonomy& tax) {
  AttackSpec spec;
  const std::string& kind = cfg.attack.kind;
  if (kind == "targeted") {
    spec.kind = AttackKind::Targeted;
  } else if (kind == "backdoor_patch") {
    spec.kind = AttackKind::BackdoorPatch;
  } else if (kind == "backdoor_blended") {
    spec.kind = AttackKind::BackdoorBlended;
  } else if (kind == "backdoor_warp") {
    spec.kind = AttackKind::BackdoorWarp;
  } else if (kind == "backdoor_label_consistent") {
    spec.kind = AttackKind::BackdoorLabelConsistent;
  } else if (kind == "adaptive_pairs") {
    spec.kind = AttackKind::AdaptivePairs;
  } else {
    throw BadConfig("config: unknown attack.kind '" + kind + "'");
  }
  spec.adv_class = cfg.attack.adv_class;
  spec.captions_per_target = cfg.attack.captions_per_target;
  spec.num_targets = cfg.attack.num_targets;
  spec.num_poisons = cfg.attack.num_poisons;
  spec.noise_sigma = cfg.attack.noise_sigma;
  spec.feature_suppression = cfg.attack.feature_suppression;
  spec.rate_ceiling = cfg.attack.rate_ceiling;
  spec.seed = cfg.attack.seed;
  spec.trigger = make_trigger(spec.kind, tax.image_h, tax.image_w,
                              cfg.attack.seed ^ 0xA5A5A5A5ULL,
                              cfg.attack.warp_strength);
  spec.trigger.patch_size = cfg.attack.patch_size;
  spec.trigger.blend_alpha = cfg.attack.blend_alpha;
  return spec;
}

DefenseConfig to_defense_config(const RunConfig& cfg) {
  DefenseConfig d;
  if (cfg.defense.mode == "none") {
    d.mode = DefenseMode::None;
  } else if (cfg.defense.mode == "roclip") {
    d.mode = DefenseMode::NnPool;
  } else if (cfg.defense.mode == "inmodality") {
    d.mode = DefenseMode::InModality;
  } else {
    throw BadConfig("config: unknown defense.mode '" + cfg.defense.mode + "'");
  }
  d.pool_fraction = cfg.defense.pool_fraction;
  d.k_frequency = cfg.defense.k;
  d.augmentation.enabled = cfg.defense.augment;
  return d;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.train.epochs;
  t.batch_size = cfg.train.batch;
  t.lr = cfg.train.lr;
  t.seed = cfg.train.seed;
  t.record_match_trace = cfg.train.record_match_trace;
  return t;
}

}  // namespace roclab
