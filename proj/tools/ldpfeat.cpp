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

// Command-line front end. Experiment verbs take a JSON config; file verbs take
// a JSON config naming their inputs. --seed and --out override the config.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "ldpfeat.hpp"

namespace {

using ldpfeat::Error;
using ldpfeat::ErrorCode;
using nlohmann::json;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
};

void AddCommon(CLI::App* app, Common& c, bool config_required = true) {
  auto* opt = app->add_option("--config", c.config, "JSON config file");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "override the master seed");
  app->add_option("--out", c.out, "override the output path");
}

json ReadJson(const std::string& path) {
  const ldpfeat::Bytes bytes = ldpfeat::ReadFileBytes(path);
  const std::string text(bytes.begin(), bytes.end());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + ldpfeat::detail::LineColumn(text, e.byte > 0 ? e.byte - 1 : 0) +
                                             ": " + e.what());
  }
}

std::string Require(const ldpfeat::detail::Fields& f, const std::string& key) {
  const std::string v = f.Get<std::string>(key, "");
  if (v.empty()) f.Fail(key, "missing");
  return v;
}

std::string OutPath(const Common& c, const ldpfeat::detail::Fields& f) {
  if (c.out) return *c.out;
  return Require(f, "output");
}

// Runs an experiment config, optionally insisting on a kind.
int RunExperimentVerb(const Common& c, std::optional<ldpfeat::ExperimentKind> kind) {
  std::optional<std::filesystem::path> out;
  if (c.out) out = *c.out;
  const ldpfeat::ExperimentConfig cfg = ldpfeat::LoadExperimentConfig(c.config, c.seed, out);
  if (kind && cfg.kind != *kind) {
    throw Error(ErrorCode::kConfigError, "field 'kind': '" + cfg.kind_name + "' does not fit this verb");
  }
  const json report = ldpfeat::Run(cfg);
  std::cout << ldpfeat::SummaryTable(report);
  std::cout << "report: " << cfg.output.string() << "\n";
  return 0;
}

int GenCorpus(const Common& c, const std::string& dtype) {
  const json doc = ReadJson(c.config);
  const ldpfeat::detail::Fields f(doc, "");
  const ldpfeat::SyntheticCorpusSpec spec = ldpfeat::detail::ParseCorpus(f.Section("corpus"));
  const uint64_t seed = c.seed.value_or(f.Get<uint64_t>("seed", 0));
  const ldpfeat::Mat data = ldpfeat::GenerateCorpus(spec, seed);
  ldpfeat::DType t = ldpfeat::DType::kFloat32;
  ldpfeat::Mat payload = data;
  if (dtype == "uint8") {
    t = ldpfeat::DType::kUint8;
    payload = (data.array() * 0.5 + 0.5).cwiseMax(0.0).cwiseMin(1.0).matrix();
  }
  const std::string out = OutPath(c, f);
  ldpfeat::SaveDescriptorFile(payload, out, t);
  std::cout << "wrote " << data.cols() << " descriptors of dim " << data.rows() << " to " << out << "\n";
  return 0;
}

int DictInfo(const std::string& path) {
  const ldpfeat::Dictionary d = ldpfeat::LoadDictionary(path);
  std::cout << "entries: " << d.size() << "\n"
            << "dim: " << d.dim() << "\n"
            << "metric: " << (d.metric() == ldpfeat::Metric::kCosine ? "cosine" : "euclidean") << "\n"
            << "partitions: " << d.partition_count() << "\n"
            << "provenance: " << d.provenance().dump() << "\n";
  return 0;
}

int Lift(const Common& c) {
  const json doc = ReadJson(c.config);
  const ldpfeat::detail::Fields f(doc, "");
  const ldpfeat::Mat input = ldpfeat::LoadDescriptorFile(Require(f, "input"));
  const ldpfeat::Dictionary db = ldpfeat::LoadDictionary(Require(f, "database"));
  const uint64_t seed = c.seed.value_or(f.Get<uint64_t>("seed", 0));
  const bool reparam = f.Get<bool>("reparameterize", true);
  ldpfeat::LiftingConfig lc;
  lc.m = f.Get<int>("m", 2);
  lc.database = &db;
  lc.partitions = f.Get<uint32_t>("partitions", db.partition_count());
  const ldpfeat::CounterRng master(seed, 0x6c696674636c69ULL);
  std::vector<ldpfeat::AffineSubspace> out(static_cast<size_t>(input.cols()));
  ldpfeat::ParallelFor(out.size(), [&](size_t i) {
    ldpfeat::CounterRng rng = master.Split(i);
    ldpfeat::LiftingConfig local = lc;
    local.rng_seed = rng();
    ldpfeat::LiftingRecord rec = ldpfeat::Lift(input.col(static_cast<Eigen::Index>(i)), local);
    if (reparam) rec = ldpfeat::Reparameterize(rec, rng());
    out[i] = ldpfeat::StripGroundTruth(rec);
  });
  const std::string path = OutPath(c, f);
  ldpfeat::SaveSubspaces(out, path);
  std::cout << "wrote " << out.size() << " subspaces to " << path << "\n";
  return 0;
}

int Privatize(const Common& c) {
  const json doc = ReadJson(c.config);
  const ldpfeat::detail::Fields f(doc, "");
  const ldpfeat::Mat input = ldpfeat::LoadDescriptorFile(Require(f, "input"));
  const ldpfeat::Dictionary dict = ldpfeat::LoadDictionary(Require(f, "dictionary"));
  ldpfeat::LdpConfig cfg;
  cfg.epsilon = f.GetBudget("epsilon", ldpfeat::PrivacyBudget::Finite(1.0));
  cfg.m = f.Get<uint32_t>("m", 1);
  cfg.dictionary = &dict;
  cfg.Validate();
  // A seed makes the output replayable; without one the kernel CSPRNG is used.
  std::optional<uint64_t> seed = c.seed;
  if (!seed && doc.contains("seed")) seed = f.Get<uint64_t>("seed", 0);
  std::vector<ldpfeat::PrivatizedFeature> out;
  if (seed) {
    ldpfeat::CounterRng rng(*seed, 0x707269764c49ULL);
    for (Eigen::Index i = 0; i < input.cols(); ++i) out.push_back(ldpfeat::Privatize(input.col(i), cfg, rng));
  } else {
    for (Eigen::Index i = 0; i < input.cols(); ++i) out.push_back(ldpfeat::Privatize(input.col(i), cfg));
  }
  const std::string path = OutPath(c, f);
  ldpfeat::SavePrivatized(out, path);
  std::cout << "wrote " << out.size() << " privatized features to " << path << "\n";
  return 0;
}

int AttackDb(const Common& c) {
  const json doc = ReadJson(c.config);
  const ldpfeat::detail::Fields f(doc, "");
  const auto subspaces = ldpfeat::LoadSubspaces(Require(f, "subspaces"));
  const ldpfeat::Dictionary db = ldpfeat::LoadDictionary(Require(f, "database"));
  const ldpfeat::DatabaseAttackConfig ac{&db, f.Get<int>("m", 2), f.Get<size_t>("v_size", 64),
                                         f.Get<size_t>("u_size", 8)};
  ldpfeat::Mat est(db.dim(), static_cast<Eigen::Index>(subspaces.size()));
  ldpfeat::ParallelFor(subspaces.size(), [&](size_t i) {
    est.col(static_cast<Eigen::Index>(i)) = ldpfeat::DatabaseAttack(subspaces[i], ac).d_hat;
  });
  const std::string path = OutPath(c, f);
  ldpfeat::SaveDescriptorFile(est, path);
  std::cout << "wrote " << subspaces.size() << " estimates to " << path << "\n";
  return 0;
}

int AttackCluster(const Common& c) {
  const json doc = ReadJson(c.config);
  const ldpfeat::detail::Fields f(doc, "");
  const auto subspaces = ldpfeat::LoadSubspaces(Require(f, "subspaces"));
  const ldpfeat::Dictionary pub = ldpfeat::LoadDictionary(Require(f, "public"));
  const auto aux = ldpfeat::LoadSubspaces(Require(f, "aux"));
  ldpfeat::ClusterAttackConfig cc;
  cc.public_db = &pub;
  cc.aux_subspaces = &aux;
  cc.m = f.Get<int>("m", 2);
  cc.v_size = f.Get<size_t>("v_size", cc.v_size);
  cc.intersection_tol = f.Get<double>("intersection_tol", cc.intersection_tol);
  cc.kmeans_iters = f.Get<int>("kmeans_iters", cc.kmeans_iters);
  cc.seed = c.seed.value_or(f.Get<uint64_t>("seed", 0));
  ldpfeat::Mat est(pub.dim(), static_cast<Eigen::Index>(subspaces.size()));
  size_t skipped = 0;
  for (size_t i = 0; i < subspaces.size(); ++i) {
    try {
      est.col(static_cast<Eigen::Index>(i)) = ldpfeat::ClusterAttack(subspaces[i], cc).d_hat;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoIntersectingAux) throw;
      est.col(static_cast<Eigen::Index>(i)).setZero();
      ++skipped;
    }
  }
  const std::string path = OutPath(c, f);
  ldpfeat::SaveDescriptorFile(est, path);
  std::cout << "wrote " << subspaces.size() << " estimates to " << path << " (" << skipped
            << " without intersecting auxiliary subspaces, written as zeros)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldpfeat: lifting attacks and subset-mechanism privacy for local descriptors"};
  app.require_subcommand(1);

  Common common;
  std::string dtype = "float32";
  std::string info_path;

  auto* dict = app.add_subcommand("dict", "dictionary tools");
  dict->require_subcommand(1);
  auto* dict_build = dict->add_subcommand("build", "build a dictionary (dict-build config)");
  AddCommon(dict_build, common);
  auto* dict_info = dict->add_subcommand("info", "describe an LDPD file");
  dict_info->add_option("path", info_path, "dictionary file")->required();

  auto* lift = app.add_subcommand("lift", "lift LDPF descriptors to LDPS subspaces");
  AddCommon(lift, common);
  auto* privatize = app.add_subcommand("privatize", "privatize LDPF descriptors to LDPZ subsets");
  AddCommon(privatize, common);

  auto* attack = app.add_subcommand("attack", "descriptor recovery attacks");
  attack->require_subcommand(1);
  auto* attack_db = attack->add_subcommand("db", "database attack on LDPS subspaces");
  AddCommon(attack_db, common);
  auto* attack_cluster = attack->add_subcommand("cluster", "clustering attack on LDPS subspaces");
  AddCommon(attack_cluster, common);

  auto* verify = app.add_subcommand("verify-ldp", "statistical privacy check (ldp-verify config)");
  AddCommon(verify, common);
  auto* utility = app.add_subcommand("utility", "matching utility study (ldp-utility config)");
  AddCommon(utility, common);
  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic LDPF corpus");
  AddCommon(gen, common);
  gen->add_option("--dtype", dtype, "float32 or uint8 (uint8 maps [-1, 1] to [0, 1])")
      ->check(CLI::IsMember({"float32", "uint8"}));
  auto* bench = app.add_subcommand("bench", "kernel throughput (bench config)");
  AddCommon(bench, common);
  auto* run = app.add_subcommand("run", "run any experiment config");
  AddCommon(run, common);

  CLI11_PARSE(app, argc, argv);

  using Kind = ldpfeat::ExperimentKind;
  try {
    if (dict_build->parsed()) return RunExperimentVerb(common, Kind::kDictBuild);
    if (dict_info->parsed()) return DictInfo(info_path);
    if (lift->parsed()) return Lift(common);
    if (privatize->parsed()) return Privatize(common);
    if (attack_db->parsed()) return AttackDb(common);
    if (attack_cluster->parsed()) return AttackCluster(common);
    if (verify->parsed()) return RunExperimentVerb(common, Kind::kLdpVerify);
    if (utility->parsed()) return RunExperimentVerb(common, Kind::kLdpUtility);
    if (gen->parsed()) return GenCorpus(common, dtype);
    if (bench->parsed()) return RunExperimentVerb(common, Kind::kBench);
    if (run->parsed()) return RunExperimentVerb(common, std::nullopt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
