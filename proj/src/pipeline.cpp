// Copyright (c) 2026 The pkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pkit/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "pkit/blur.hpp"
#include "pkit/quality.hpp"

namespace pkit {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::kClean, "clean"},
    {ExperimentKind::kPositional, "positional"},
    {ExperimentKind::kFullBlur, "full_blur"},
    {ExperimentKind::kMixedKeys, "mixed_keys"},
    {ExperimentKind::kAttackKnownNoise, "attack_known_noise"},
    {ExperimentKind::kAttackRandomBlur, "attack_random_blur"},
    {ExperimentKind::kPollutedTest, "polluted_test"},
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error("spec: invalid value '" + text + "' for " + key);
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw Error("spec: invalid boolean '" + text + "' for " + key);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

using Setter = std::function<void(ExperimentSpec&, const std::string& key, const std::string& value)>;

template <class T, class Field>
Setter number(Field field) {
  return [field](ExperimentSpec& s, const std::string& k, const std::string& v) { field(s) = parse_number<T>(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"kind", [](ExperimentSpec& s, const std::string&, const std::string& v) { s.kind = parse_experiment_kind(v); }},
      {"model", [](ExperimentSpec& s, const std::string&, const std::string& v) { s.model = parse_model_kind(v); }},
      {"dataset_dir", [](ExperimentSpec& s, const std::string&, const std::string& v) { s.dataset_dir = v; }},
      {"synth.class_count", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.synth.class_count; })},
      {"synth.per_class", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.synth.per_class; })},
      {"synth.duration", number<double>([](ExperimentSpec& s) -> auto& { return s.synth.duration; })},
      {"synth.sample_rate", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.synth.sample_rate; })},
      {"synth.seed", number<uint64_t>([](ExperimentSpec& s) -> auto& { return s.synth.seed; })},
      {"protection.k", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.protection.k; })},
      {"protection.p", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.protection.p; })},
      {"protection.b", number<double>([](ExperimentSpec& s) -> auto& { return s.protection.b; })},
      {"protection.min_len", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.protection.min_len; })},
      {"protection.normalize_taps",
       [](ExperimentSpec& s, const std::string& k, const std::string& v) { s.protection.normalize_taps = parse_bool(k, v); }},
      {"protection.key_seed",
       [](ExperimentSpec& s, const std::string& k, const std::string& v) { s.key_seed = parse_number<uint64_t>(k, v); }},
      {"protection.master_key_hex", [](ExperimentSpec& s, const std::string&, const std::string& v) { s.master_key_hex = v; }},
      {"protection.keyring", [](ExperimentSpec& s, const std::string&, const std::string& v) { s.keyring = v; }},
      {"protection.store_key",
       [](ExperimentSpec& s, const std::string& k, const std::string& v) { s.store_key = parse_bool(k, v); }},
      {"train.epochs", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.train.epochs; })},
      {"train.batch_size", number<uint32_t>([](ExperimentSpec& s) -> auto& { return s.train.batch_size; })},
      {"train.learning_rate", number<double>([](ExperimentSpec& s) -> auto& { return s.train.learning_rate; })},
      {"train.seed", number<uint64_t>([](ExperimentSpec& s) -> auto& { return s.train.seed; })},
      {"train.shuffle",
       [](ExperimentSpec& s, const std::string& k, const std::string& v) { s.train.shuffle = parse_bool(k, v); }},
      {"attack.amplitude", number<double>([](ExperimentSpec& s) -> auto& { return s.attack_amplitude; })},
      {"attack.seed", number<uint64_t>([](ExperimentSpec& s) -> auto& { return s.attack_seed; })},
  };
  return table;
}

void set_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw Error("spec: unknown key '" + key + "'");
  it->second(spec, key, unquote(value));
}

bool needs_protection(ExperimentKind kind) { return kind != ExperimentKind::kClean; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void quantize_in_place(Dataset& ds) {
  for (auto& clip : ds.clips) clip.samples = pcm16_round_trip(clip.samples);
}

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error(std::string("stage '") + name + "': " + e.what());
  }
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else {
    out[prefix] = j;
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  for (const auto& [k, name] : kKindNames)
    if (text == name) return k;
  throw Error("unknown experiment kind '" + text + "'");
}

void ExperimentSpec::validate() const {
  train.validate();
  if (dataset_dir.empty() && synth.class_count < 2) throw Error("spec: synth.class_count must be >= 2");
  if (kind == ExperimentKind::kAttackKnownNoise && !(attack_amplitude > 0.0)) {
    throw Error("spec: attack_known_noise requires attack.amplitude > 0");
  }
  if (!(protection.b > 0.0) || protection.k < 1 || protection.p < protection.k) {
    throw Error("spec: invalid protection k/p/b");
  }
  if (!master_key_hex.empty() && !keyring.empty()) throw Error("spec: give master_key_hex or keyring, not both");
}

ExperimentSpec parse_spec(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error("spec line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("spec line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    set_key(spec, section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
  return spec;
}

ExperimentSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentSpec spec = parse_spec(buf.str());
  if (!spec.keyring.empty() && fs::path(spec.keyring).is_relative()) {
    spec.keyring = (path.parent_path() / spec.keyring).string();
  }
  return spec;
}

void apply_override(ExperimentSpec& spec, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error("override '" + assignment + "' is not key=value");
  set_key(spec, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string format_spec(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "kind = \"" << to_string(spec.kind) << "\"\n";
  out << "model = \"" << to_string(spec.model) << "\"\n";
  if (!spec.dataset_dir.empty()) out << "dataset_dir = \"" << spec.dataset_dir << "\"\n";
  out << "\n[synth]\n"
      << "class_count = " << spec.synth.class_count << "\n"
      << "per_class = " << spec.synth.per_class << "\n"
      << "duration = " << format_double(spec.synth.duration) << "\n"
      << "sample_rate = " << spec.synth.sample_rate << "\n"
      << "seed = " << spec.synth.seed << "\n";
  out << "\n[protection]\n"
      << "k = " << spec.protection.k << "\n"
      << "p = " << spec.protection.p << "\n"
      << "b = " << format_double(spec.protection.b) << "\n"
      << "min_len = " << spec.protection.min_len << "\n"
      << "normalize_taps = " << (spec.protection.normalize_taps ? "true" : "false") << "\n"
      << "store_key = " << (spec.store_key ? "true" : "false") << "\n";
  if (spec.key_seed) out << "key_seed = " << *spec.key_seed << "\n";
  if (!spec.keyring.empty()) out << "keyring = \"" << spec.keyring << "\"\n";
  out << "\n[train]\n"
      << "epochs = " << spec.train.epochs << "\n"
      << "batch_size = " << spec.train.batch_size << "\n"
      << "learning_rate = " << format_double(spec.train.learning_rate) << "\n"
      << "seed = " << spec.train.seed << "\n"
      << "shuffle = " << (spec.train.shuffle ? "true" : "false") << "\n";
  out << "\n[attack]\n"
      << "amplitude = " << format_double(spec.attack_amplitude) << "\n"
      << "seed = " << spec.attack_seed << "\n";
  return out.str();
}

ExperimentResult run_experiment(const ExperimentSpec& input_spec, const fs::path& run_dir) {
  ExperimentSpec spec = input_spec;
  spec.validate();
  fs::create_directories(run_dir);
  spec.synth.patch_len = spec.protection.p;

  auto [train_set, test_set] = stage("data", [&] {
    if (!spec.dataset_dir.empty()) {
      const fs::path root(spec.dataset_dir);
      return std::pair{load_dataset(root / "train" / "manifest.json"), load_dataset(root / "test" / "manifest.json")};
    }
    auto synth = synth_dataset(spec.synth);
    save_dataset(synth.first, run_dir / "data" / "clean" / "train");
    save_dataset(synth.second, run_dir / "data" / "clean" / "test");
    return synth;
  });
  const uint32_t class_count = train_set.manifest.class_count;
  if (test_set.manifest.class_count != class_count) throw Error("stage 'data': train/test class counts differ");

  Keyring keyring = stage("keyring", [&] {
    Keyring kr;
    kr.cfg = spec.protection;
    kr.cfg.class_count = class_count;
    if (kr.cfg.min_len == 0) {
      size_t shortest = std::numeric_limits<uint32_t>::max();
      for (const auto* ds : {&train_set, &test_set})
        for (const auto& c : ds->clips) shortest = std::min(shortest, c.samples.size());
      kr.cfg.min_len = static_cast<uint32_t>(shortest);
    }
    kr.cfg.mode = spec.kind == ExperimentKind::kFullBlur ? BlurMode::kFullSample : BlurMode::kPositional;
    if (!spec.keyring.empty()) {
      kr.master = import_keyring(spec.keyring).master;
    } else if (!spec.master_key_hex.empty()) {
      kr.master = MasterKey::from_hex(spec.master_key_hex);
    } else if (spec.key_seed) {
      kr.master = MasterKey::from_seed(*spec.key_seed);
    } else {
      kr.master = MasterKey::generate();
    }
    kr.cfg.validate();
    if (needs_protection(spec.kind) && kr.cfg.bin_width() == 0) throw Error("min_len too small for class count");
    return kr;
  });
  spec.protection = keyring.cfg;
  spec.master_key_hex.clear();
  if (spec.store_key) {
    export_keyring(keyring, run_dir / "keyring.pkr");
    if (!spec.key_seed) spec.keyring = "keyring.pkr";
  } else if (!spec.key_seed) {
    spec.keyring.clear();
  }
  write_text(run_dir / "spec.toml", format_spec(spec));

  Dataset attacker_train = train_set;
  std::vector<BlurReport> log;
  if (needs_protection(spec.kind)) {
    stage("protect", [&] {
      auto prot = protect_dataset(train_set, keyring, keyring.cfg.mode);
      attacker_train = std::move(prot.data);
      quantize_in_place(attacker_train);
      log = std::move(prot.log);
      save_dataset(attacker_train, run_dir / "data" / "protected" / "train");
      write_protection_log(log, run_dir / "protection_log.jsonl");
    });
  }

  TrainResult trained = stage("train", [&] { return train(spec.model, attacker_train, spec.train); });
  save_checkpoint(trained.model, run_dir / "model.tnn");
  write_history_csv(trained.history, run_dir / "history.csv");

  ExperimentResult result;
  stage("evaluate", [&] {
    result.clean_test_acc = evaluate(trained.model, test_set).accuracy;
    auto eval_on = [&](ProtectedDataset&& ds, const char* name) {
      quantize_in_place(ds.data);
      save_dataset(ds.data, run_dir / "data" / "eval" / name);
      return evaluate(trained.model, ds.data).accuracy;
    };
    if (needs_protection(spec.kind)) {
      result.poisoned_test_acc = eval_on(protect_dataset(test_set, keyring, keyring.cfg.mode, true), "polluted_test");
    }
    switch (spec.kind) {
      case ExperimentKind::kMixedKeys:
        result.mixed_key_test_acc =
            eval_on(apply_mixed_keys(test_set, keyring, cyclic_permutation(class_count)), "mixed_key_test");
        break;
      case ExperimentKind::kAttackKnownNoise: {
        std::vector<uint32_t> positions;
        for (const auto& p : keyring.protections()) positions.push_back(p.position);
        result.attacked_test_acc =
            eval_on(attack_known_location_noise(test_set, positions, keyring.cfg.p, spec.attack_amplitude, spec.attack_seed),
                    "attacked_test");
        break;
      }
      case ExperimentKind::kAttackRandomBlur:
        result.attacked_test_acc = eval_on(attack_random_blur(test_set, keyring.cfg, spec.attack_seed), "attacked_test");
        break;
      default:
        break;
    }
  });

  QualityReport quality = stage("quality", [&] { return dataset_quality_report(train_set, attacker_train, log); });
  write_quality_report(quality, run_dir / "quality.json");
  result.frechet_mfcc = quality.frechet_mfcc;
  result.snr_median = quality.snr.median;

  ordered_json summary;
  summary["kind"] = to_string(spec.kind);
  summary["model"] = to_string(spec.model);
  summary["clean_test_acc"] = result.clean_test_acc;
  summary["final_train_acc"] = trained.history.back().accuracy;
  if (result.poisoned_test_acc) summary["poisoned_test_acc"] = *result.poisoned_test_acc;
  if (result.mixed_key_test_acc) summary["mixed_key_test_acc"] = *result.mixed_key_test_acc;
  if (result.attacked_test_acc) summary["attacked_test_acc"] = *result.attacked_test_acc;
  summary["frechet_mfcc"] = quality.frechet_mfcc;
  summary["snr_stats"] = {{"min", quality.snr.min}, {"median", quality.snr.median}, {"mean", quality.snr.mean}};
  summary["clamped_samples"] = quality.clamped_samples;
  summary["config"] = {
      {"class_count", class_count},
      {"train_clips", train_set.clips.size()},
      {"test_clips", test_set.clips.size()},
      {"k", keyring.cfg.k},
      {"p", keyring.cfg.p},
      {"b", keyring.cfg.b},
      {"min_len", keyring.cfg.min_len},
      {"mode", to_string(keyring.cfg.mode)},
      {"normalize_taps", keyring.cfg.normalize_taps},
      {"epochs", spec.train.epochs},
      {"batch_size", spec.train.batch_size},
      {"learning_rate", spec.train.learning_rate},
      {"train_seed", spec.train.seed},
      {"mfcc_config_hash", quality.config_hash},
  };
  if (spec.kind == ExperimentKind::kAttackKnownNoise) summary["config"]["attack_amplitude"] = spec.attack_amplitude;
  result.summary_json = summary.dump(2) + "\n";
  write_text(run_dir / "summary.json", result.summary_json);
  return result;
}

std::vector<MetricRow> RunComparison::differences() const {
  std::vector<MetricRow> out;
  for (const auto& r : rows)
    if (r.differs()) out.push_back(r);
  return out;
}

std::string RunComparison::table(bool all_rows) const {
  std::ostringstream out;
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::setprecision(6) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  out << std::left << std::setw(24) << "metric" << std::setw(16) << "a" << std::setw(16) << "b" << "delta(b-a)\n";
  for (const auto& r : all_rows ? rows : differences()) {
    out << std::left << std::setw(24) << r.metric << std::setw(16) << cell(r.a) << std::setw(16) << cell(r.b)
        << cell(r.delta()) << "\n";
  }
  for (const auto& m : config_mismatches) out << "config mismatch: " << m << "\n";
  return out.str();
}

RunComparison compare_runs(const fs::path& dir_a, const fs::path& dir_b) {
  auto load = [](const fs::path& dir) {
    std::ifstream in(dir / "summary.json");
    if (!in) throw Error("compare: missing " + (dir / "summary.json").string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("compare: " + (dir / "summary.json").string() + ": " + e.what());
    }
  };
  const auto a = load(dir_a);
  const auto b = load(dir_b);
  std::map<std::string, nlohmann::json> fa, fb;
  flatten(a, "", fa);
  flatten(b, "", fb);

  std::map<std::string, bool> keys;
  for (const auto& [k, v] : fa) keys[k] = true;
  for (const auto& [k, v] : fb) keys[k] = true;

  RunComparison cmp;
  for (const auto& [key, unused] : keys) {
    const auto ia = fa.find(key);
    const auto ib = fb.find(key);
    const bool in_config = key.rfind("config.", 0) == 0;
    const nlohmann::json va = ia == fa.end() ? nlohmann::json() : ia->second;
    const nlohmann::json vb = ib == fb.end() ? nlohmann::json() : ib->second;
    if (in_config || !(va.is_number() || va.is_null()) || !(vb.is_number() || vb.is_null())) {
      if (va != vb) cmp.config_mismatches.push_back(key + ": " + va.dump() + " vs " + vb.dump());
      continue;
    }
    MetricRow row{key, std::nullopt, std::nullopt};
    if (va.is_number()) row.a = va.get<double>();
    if (vb.is_number()) row.b = vb.get<double>();
    cmp.rows.push_back(row);
  }
  return cmp;
}

}  // namespace pkit
