// Copyright 2026 The ldpfeat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldpfeat/common.hpp"
#include "ldpfeat/corpus.hpp"
#include "ldpfeat/experiments.hpp"
#include "ldpfeat/io.hpp"

namespace ldpfeat {

using nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

enum class ExperimentKind { kLiftAttackDb, kLiftAttackCluster, kLdpVerify, kLdpUtility, kDictBuild, kBench };

inline ExperimentKind ParseExperimentKind(const std::string& s) {
  if (s == "lift-attack-db") return ExperimentKind::kLiftAttackDb;
  if (s == "lift-attack-cluster") return ExperimentKind::kLiftAttackCluster;
  if (s == "ldp-verify") return ExperimentKind::kLdpVerify;
  if (s == "ldp-utility") return ExperimentKind::kLdpUtility;
  if (s == "dict-build") return ExperimentKind::kDictBuild;
  if (s == "bench") return ExperimentKind::kBench;
  throw Error(ErrorCode::kConfigError, "field 'kind': unknown experiment kind '" + s + "'");
}

namespace detail {

// Typed field access with errors naming the dotted field path.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) Fail("", "expected an object");
  }

  Fields Section(const std::string& key) const {
    static const json kEmpty = json::object();
    return obj_.contains(key) ? Fields(obj_.at(key), Join(key)) : Fields(kEmpty, Join(key));
  }

  template <typename T>
  T Get(const std::string& key, T fallback) const {
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) Fail(key, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) Fail(key, "expected an integer");
      if (std::is_unsigned_v<T> && v.get<int64_t>() < 0) Fail(key, "expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) Fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) Fail(key, "expected a string");
    }
    return v.get<T>();
  }

  template <typename T>
  std::vector<T> GetList(const std::string& key, std::vector<T> fallback) const {
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_array()) Fail(key, "expected an array");
    std::vector<T> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<int64_t>() < 0) Fail(key, "expected non-negative integers");
      out.push_back(e.get<T>());
    }
    return out;
  }

  PrivacyBudget GetBudget(const std::string& key, PrivacyBudget fallback) const {
    if (!obj_.contains(key)) return fallback;
    const json& v = obj_.at(key);
    if (v.is_string() && v.get<std::string>() == "inf") return PrivacyBudget::Infinite();
    if (!v.is_number() || v.get<double>() < 0.0) Fail(key, "expected a non-negative number or \"inf\"");
    return PrivacyBudget::Finite(v.get<double>());
  }

  [[noreturn]] void Fail(const std::string& key, const std::string& what) const {
    throw Error(ErrorCode::kConfigError, "field '" + Join(key) + "': " + what);
  }

 private:
  std::string Join(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& obj_;
  std::string path_;
};

inline SyntheticCorpusSpec ParseCorpus(const Fields& f, SyntheticCorpusSpec spec = {}) {
  spec.n = f.Get<int64_t>("n", spec.n);
  spec.generator = ParseCorpusGenerator(f.Get<std::string>("generator", CorpusGeneratorName(spec.generator)));
  spec.components = f.Get<size_t>("components", spec.components);
  spec.spread = f.Get<double>("spread", spec.spread);
  spec.size = f.Get<size_t>("size", spec.size);
  spec.path = f.Get<std::string>("path", spec.path.string());
  try {
    spec.Validate();
  } catch (const Error& e) {
    f.Fail("", e.what());
  }
  return spec;
}

inline TransformModel ParseModel(const Fields& f, const std::string& key, TransformModel fallback) {
  const std::string s = f.Get<std::string>(key, fallback == TransformModel::kSimilarity ? "similarity" : "homography");
  if (s == "similarity") return TransformModel::kSimilarity;
  if (s == "homography") return TransformModel::kHomography;
  f.Fail(key, "expected \"similarity\" or \"homography\"");
}

inline std::string LineColumn(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kLdpVerify;
  std::string kind_name;
  size_t trials = 1;
  uint64_t seed = 0;
  std::filesystem::path output;
  json raw;

  DbAttackParams db;
  ClusterAttackParams cluster;
  LdpVerifyParams verify;
  LdpUtilityParams utility;
  SyntheticCorpusSpec dict_corpus;
  size_t dict_k = 256;
  int dict_iters = 25;
  std::filesystem::path dict_out;
  BenchParams bench;
};

// Parses and validates a config document. Seed and output overrides are
// applied before validation and echoed in the report.
inline ExperimentConfig ParseExperimentConfig(const json& doc, std::optional<uint64_t> seed_override = std::nullopt,
                                              std::optional<std::filesystem::path> out_override = std::nullopt) {
  ExperimentConfig c;
  c.raw = doc;
  if (seed_override) c.raw["seed"] = *seed_override;
  if (out_override) c.raw["output"] = out_override->string();
  const detail::Fields root(c.raw, "");
  if (!c.raw.contains("kind")) root.Fail("kind", "missing");
  c.kind_name = root.Get<std::string>("kind", "");
  c.kind = ParseExperimentKind(c.kind_name);
  c.trials = root.Get<size_t>("trials", 1);
  if (c.trials < 1) root.Fail("trials", "must be at least 1");
  c.seed = root.Get<uint64_t>("seed", 0);
  c.output = root.Get<std::string>("output", "report.json");

  const auto corpus = root.Section("corpus");
  switch (c.kind) {
    case ExperimentKind::kLiftAttackDb: {
      c.db.corpus = detail::ParseCorpus(corpus, {128, CorpusGenerator::kGaussianMixture, 100, 0.5, 10000, {}});
      const auto l = root.Section("lifting");
      const auto a = root.Section("attack");
      c.db.m = l.Get<int>("m", 2);
      c.db.partitions = l.Get<uint32_t>("partitions", 1);
      c.db.v_size = a.Get<size_t>("v_size", 64);
      c.db.u_size = a.Get<size_t>("u_size", 8);
      if (c.db.m < 2 || c.db.m % 2 != 0 || c.db.m >= c.db.corpus.n) l.Fail("m", "must be even, >= 2 and below n");
      if (c.db.partitions < 1 || c.db.corpus.size % c.db.partitions != 0) {
        l.Fail("partitions", "must divide corpus.size");
      }
      if (c.db.u_size < 1 || c.db.v_size < c.db.u_size) a.Fail("u_size", "need 1 <= u_size <= v_size");
      c.db.trials = c.trials;
      c.db.seed = c.seed;
      break;
    }
    case ExperimentKind::kLiftAttackCluster: {
      c.cluster.corpus = detail::ParseCorpus(corpus, {128, CorpusGenerator::kGaussianMixture, 100, 0.5, 1, {}});
      if (c.cluster.corpus.generator != CorpusGenerator::kGaussianMixture) {
        corpus.Fail("generator", "cluster experiments need the mixture generator");
      }
      const auto s = root.Section("cluster");
      auto& p = c.cluster;
      p.private_size = s.Get<size_t>("private_size", p.private_size);
      p.partitions = s.Get<uint32_t>("partitions", p.partitions);
      p.public_size = s.Get<size_t>("public_size", p.public_size);
      p.aux_count = s.Get<size_t>("aux_count", p.aux_count);
      p.m = s.Get<int>("m", p.m);
      p.v_size = s.Get<size_t>("v_size", p.v_size);
      p.intersection_tol = s.Get<double>("intersection_tol", p.intersection_tol);
      p.collision_radius = s.Get<double>("collision_radius", p.collision_radius);
      p.kmeans_iters = s.Get<int>("kmeans_iters", p.kmeans_iters);
      p.top_n = s.Get<size_t>("top_n", p.top_n);
      p.ratio = s.Get<double>("ratio", p.ratio);
      if (p.m < 2 || p.m % 2 != 0 || p.m >= p.corpus.n) s.Fail("m", "must be even, >= 2 and below n");
      if (p.partitions < 1 || p.private_size % p.partitions != 0) s.Fail("partitions", "must divide private_size");
      if (p.aux_count < 1) s.Fail("aux_count", "must be at least 1");
      if (p.public_size < p.v_size) s.Fail("public_size", "must be at least v_size");
      p.trials = c.trials;
      p.seed = c.seed;
      break;
    }
    case ExperimentKind::kLdpVerify: {
      const auto s = root.Section("ldp");
      auto& p = c.verify;
      p.domain_size = s.Get<uint64_t>("domain_size", p.domain_size);
      p.m = s.Get<uint32_t>("m", p.m);
      p.epsilon = s.GetBudget("epsilon", p.epsilon);
      p.trials = s.Get<uint64_t>("trials", p.trials);
      p.n = s.Get<int64_t>("n", p.n);
      if (p.m < 1 || p.m > p.domain_size) s.Fail("m", "must be in [1, domain_size]");
      if (p.trials < 1) s.Fail("trials", "must be at least 1");
      if (BinomialCount(p.domain_size, p.m) > kMaxVerifiableOutputs) {
        s.Fail("domain_size", "C(domain_size, m) exceeds " + std::to_string(kMaxVerifiableOutputs));
      }
      p.seed = c.seed;
      break;
    }
    case ExperimentKind::kLdpUtility: {
      auto& p = c.utility;
      p.corpus = detail::ParseCorpus(corpus, {128, CorpusGenerator::kGaussianMixture, 100, 0.5, 1, {}});
      if (p.corpus.generator != CorpusGenerator::kGaussianMixture) {
        corpus.Fail("generator", "utility experiments need the mixture generator");
      }
      const auto d = root.Section("dictionary");
      p.k = d.Get<size_t>("k", p.k);
      p.dict_train_size = d.Get<size_t>("train_size", p.dict_train_size);
      p.kmeans_iters = d.Get<int>("iters", p.kmeans_iters);
      if (p.k < 1 || p.k > p.dict_train_size) d.Fail("k", "must be in [1, train_size]");
      const auto l = root.Section("ldp");
      p.epsilon = l.GetBudget("epsilon", p.epsilon);
      p.m = l.Get<uint32_t>("m", p.m);
      if (p.m < 1 || p.m > p.k) l.Fail("m", "must be in [1, dictionary.k]");
      const auto sc = root.Section("scene");
      auto& scene = p.utility.scene;
      scene.ref_count = sc.Get<size_t>("ref_count", scene.ref_count);
      scene.query_count = sc.Get<size_t>("query_count", scene.query_count);
      scene.outlier_fraction = sc.Get<double>("outlier_fraction", scene.outlier_fraction);
      scene.noise_px = sc.Get<double>("noise_px", scene.noise_px);
      scene.image_size = sc.Get<double>("image_size", scene.image_size);
      scene.descriptor_noise = sc.Get<double>("descriptor_noise", scene.descriptor_noise);
      scene.model = detail::ParseModel(sc, "model", scene.model);
      const auto r = root.Section("ransac");
      p.utility.ransac.model = scene.model;
      p.utility.ransac.iters = r.Get<int>("iters", p.utility.ransac.iters);
      p.utility.ransac.inlier_px = r.Get<double>("inlier_px", p.utility.ransac.inlier_px);
      if (p.utility.ransac.iters < 1) r.Fail("iters", "must be at least 1");
      const auto u = root.Section("utility");
      p.pool_size = u.Get<size_t>("pool_size", p.pool_size);
      const std::string matcher = u.Get<std::string>("matcher", "vocabulary");
      if (matcher == "vocabulary") {
        p.utility.matcher = MatcherKind::kVocabulary;
      } else if (matcher == "mutual-nn") {
        p.utility.matcher = MatcherKind::kMutualNN;
      } else {
        u.Fail("matcher", "expected \"vocabulary\" or \"mutual-nn\"");
      }
      p.utility.success_tol_px = u.Get<double>("success_tol_px", p.utility.success_tol_px);
      p.utility.min_inliers = u.Get<size_t>("min_inliers", p.utility.min_inliers);
      p.utility.scramble_queries = u.Get<bool>("scramble_queries", p.utility.scramble_queries);
      if (p.pool_size < scene.ref_count + scene.query_count) u.Fail("pool_size", "smaller than one scene");
      if (scene.outlier_fraction < 0.0 || scene.outlier_fraction >= 1.0) {
        sc.Fail("outlier_fraction", "must be in [0, 1)");
      }
      p.utility.trials = c.trials;
      p.utility.seed = c.seed;
      break;
    }
    case ExperimentKind::kDictBuild: {
      c.dict_corpus = detail::ParseCorpus(corpus, {128, CorpusGenerator::kGaussianMixture, 100, 0.5, 20000, {}});
      const auto d = root.Section("dictionary");
      c.dict_k = d.Get<size_t>("k", c.dict_k);
      c.dict_iters = d.Get<int>("iters", c.dict_iters);
      if (c.dict_k < 1 || c.dict_k > c.dict_corpus.size) d.Fail("k", "must be in [1, corpus.size]");
      if (c.dict_iters < 1) d.Fail("iters", "must be at least 1");
      std::filesystem::path fallback = c.output;
      fallback.replace_extension(".ldpd");
      c.dict_out = d.Get<std::string>("out", fallback.string());
      break;
    }
    case ExperimentKind::kBench: {
      const auto b = root.Section("bench");
      auto& p = c.bench;
      p.domain_sizes = b.GetList<size_t>("domain_sizes", p.domain_sizes);
      p.n = b.Get<int64_t>("n", p.n);
      p.subspace_dim = b.Get<int>("subspace_dim", p.subspace_dim);
      p.repetitions = b.Get<size_t>("repetitions", p.repetitions);
      p.projections_per_rep = b.Get<size_t>("projections_per_rep", p.projections_per_rep);
      p.queries_per_rep = b.Get<size_t>("queries_per_rep", p.queries_per_rep);
      p.m = b.Get<uint32_t>("m", p.m);
      p.epsilon = b.Get<double>("epsilon", p.epsilon);
      if (p.repetitions < 10) b.Fail("repetitions", "must be at least 10");
      if (p.domain_sizes.empty()) b.Fail("domain_sizes", "must be non-empty");
      for (size_t k : p.domain_sizes) {
        if (k < 1) b.Fail("domain_sizes", "entries must be positive");
      }
      if (p.subspace_dim < 1 || p.subspace_dim >= p.n) b.Fail("subspace_dim", "must be in [1, n)");
      p.seed = c.seed;
      break;
    }
  }
  return c;
}

inline ExperimentConfig ParseExperimentConfigText(const std::string& text,
                                                  std::optional<uint64_t> seed_override = std::nullopt,
                                                  std::optional<std::filesystem::path> out_override = std::nullopt) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, "config parse error at " + detail::LineColumn(text, e.byte > 0 ? e.byte - 1 : 0) +
                                             ": " + e.what());
  }
  return ParseExperimentConfig(doc, seed_override, out_override);
}

inline ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path,
                                             std::optional<uint64_t> seed_override = std::nullopt,
                                             std::optional<std::filesystem::path> out_override = std::nullopt) {
  const Bytes bytes = ReadFileBytes(path);
  return ParseExperimentConfigText(std::string(bytes.begin(), bytes.end()), seed_override, out_override);
}

namespace detail {

inline json VerdictJson(const LdpVerdict& v) {
  return {{"pass", v.pass},
          {"worst_ratio", std::isfinite(v.worst_ratio) ? json(v.worst_ratio) : json("inf")},
          {"bound", std::isfinite(v.bound) ? json(v.bound) : json("inf")},
          {"ratio_test_pass", v.ratio_test_pass},
          {"scenario_pass", v.scenario_pass},
          {"max_tv", v.max_tv},
          {"tv_slack", v.tv_slack},
          {"inclusion_rate", v.inclusion_rate},
          {"inclusion_expected", v.inclusion_expected},
          {"trials", v.trials},
          {"outputs", v.outputs},
          {"z", v.z}};
}

}  // namespace detail

// Runs the experiment and returns the report document; nothing is written.
// The "timing" member is the only field that varies between identical runs.
inline json RunExperiment(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  json metrics = json::object();
  json rows = json::array();
  switch (c.kind) {
    case ExperimentKind::kLiftAttackDb: {
      const DbAttackResult r = RunDbAttack(c.db);
      metrics = {{"recovery_rate", r.recovery_rate},
                 {"exact_adversarial_recovery", r.exact_adversarial_recovery},
                 {"median_cosine", r.median_cosine},
                 {"median_baseline_cosine", r.median_baseline_cosine}};
      for (size_t t = 0; t < r.per_trial.size(); ++t) {
        const auto& x = r.per_trial[t];
        rows.push_back({{"trial", t},
                        {"exact", x.exact},
                        {"cosine", x.cosine},
                        {"baseline_cosine", x.baseline_cosine},
                        {"adversarial_error", x.adversarial_error}});
      }
      break;
    }
    case ExperimentKind::kLiftAttackCluster: {
      const ClusterAttackResult r = RunClusterAttack(c.cluster);
      metrics = {{"selection_rate", r.selection_rate},
                 {"chance_rate", r.chance_rate},
                 {"no_aux_rate", r.no_aux_rate},
                 {"collision_free_rate", r.collision_free_rate},
                 {"intersection_success_rate", r.intersection_success_rate},
                 {"median_cosine", r.median_cosine}};
      for (size_t t = 0; t < r.per_trial.size(); ++t) {
        const auto& x = r.per_trial[t];
        rows.push_back({{"trial", t},
                        {"has_aux", x.has_aux},
                        {"correct", x.correct},
                        {"collision_free", x.collision_free},
                        {"intersection_ok", x.intersection_ok},
                        {"cosine", x.cosine}});
      }
      break;
    }
    case ExperimentKind::kLdpVerify: {
      metrics = detail::VerdictJson(RunLdpVerify(c.verify));
      break;
    }
    case ExperimentKind::kLdpUtility: {
      const LdpUtilityData data = PrepareUtilityData(c.utility, c.seed);
      const UtilityMetrics u = RunLdpUtility(c.utility, data);
      const double p = u.word_survival_expected;
      metrics = {{"success_rate", u.success_rate},
                 {"mean_inlier_fraction", u.mean_inlier_fraction},
                 {"word_survival_rate", u.word_survival_rate},
                 {"word_survival_expected", p},
                 {"word_survival_sigma", std::sqrt(p * (1.0 - p) / static_cast<double>(std::max<uint64_t>(1, u.keypoints)))},
                 {"keypoints", u.keypoints}};
      for (size_t t = 0; t < u.per_trial.size(); ++t) {
        const auto& x = u.per_trial[t];
        rows.push_back({{"trial", t},
                        {"success", x.success},
                        {"candidates", x.candidates},
                        {"inliers", x.inliers},
                        {"keypoints", x.keypoints},
                        {"words_survived", x.words_survived},
                        {"transform_error", x.transform_error}});
      }
      break;
    }
    case ExperimentKind::kDictBuild: {
      const Mat corpus = GenerateCorpus(c.dict_corpus, c.seed);
      KMeansResult r = BuildSphericalKMeans(corpus, c.dict_k, c.dict_iters, c.seed);
      SaveDictionary(r.dictionary, c.dict_out);
      metrics = {{"k", r.dictionary.size()},
                 {"dim", r.dictionary.dim()},
                 {"objective", r.objective_trace.empty() ? 0.0 : r.objective_trace.back()},
                 {"rounds", r.objective_trace.size()},
                 {"dictionary_path", c.dict_out.string()}};
      for (size_t i = 0; i < r.objective_trace.size(); ++i) rows.push_back({{"round", i}, {"objective", r.objective_trace[i]}});
      break;
    }
    case ExperimentKind::kBench: {
      json kernels = json::array();
      for (const BenchRow& b : RunBench(c.bench)) {
        kernels.push_back({{"kernel", b.kernel},
                           {"domain_size", b.domain_size},
                           {"ops_per_rep", b.ops_per_rep},
                           {"median_s", b.median_s},
                           {"p95_s", b.p95_s},
                           {"ops_per_sec", b.ops_per_sec}});
      }
      metrics = {{"repetitions", c.bench.repetitions}};
      json timing = {{"kernels", kernels}};
      json report = {{"schema_version", kReportSchemaVersion}, {"kind", c.kind_name}, {"config", c.raw},
                     {"metrics", metrics}, {"trials", rows}};
      timing["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report["timing"] = timing;
      return report;
    }
  }
  json report = {{"schema_version", kReportSchemaVersion}, {"kind", c.kind_name}, {"config", c.raw},
                 {"metrics", metrics}, {"trials", rows}};
  report["timing"] = {{"wall_clock_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return report;
}

inline std::string SummaryTable(const json& report) {
  std::ostringstream out;
  out << "experiment: " << report.at("kind").get<std::string>() << "\n";
  size_t width = 6;
  for (const auto& [k, v] : report.at("metrics").items()) width = std::max(width, k.size());
  out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  value\n";
  out << std::string(width, '-') << "  " << std::string(12, '-') << "\n";
  for (const auto& [k, v] : report.at("metrics").items()) {
    out << std::left << std::setw(static_cast<int>(width)) << k << "  " << v.dump() << "\n";
  }
  if (report.contains("timing")) {
    const json& t = report.at("timing");
    if (t.contains("kernels")) {
      out << "\nkernel      domain_size  median_s     p95_s        ops_per_sec\n";
      for (const auto& k : t.at("kernels")) {
        out << std::left << std::setw(12) << k.at("kernel").get<std::string>() << std::setw(13)
            << k.at("domain_size").get<size_t>() << std::setw(13) << k.at("median_s").get<double>() << std::setw(13)
            << k.at("p95_s").get<double>() << k.at("ops_per_sec").get<double>() << "\n";
      }
    }
    out << "\nwall clock: " << t.at("wall_clock_s").get<double>() << " s\n";
  }
  return out.str();
}

inline std::filesystem::path SummaryPath(const std::filesystem::path& report_path) {
  std::filesystem::path p = report_path;
  p.replace_extension(".txt");
  return p;
}

// Runs and writes the report and its summary. Any failure propagates before
// either file is created.
inline json Run(const ExperimentConfig& c) {
  const json report = RunExperiment(c);
  WriteFileAtomic(c.output, report.dump(2) + "\n");
  WriteFileAtomic(SummaryPath(c.output), SummaryTable(report));
  return report;
}

}  // namespace ldpfeat
