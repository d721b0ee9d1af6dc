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

// Lift one descriptor, attack it with the database attack, then privatize it
// with the subset mechanism and show which words survive.

#include <iostream>

#include "ldpfeat.hpp"

int main() {
  using namespace ldpfeat;
  SyntheticCorpusSpec spec;
  spec.n = 32;
  spec.components = 20;
  spec.spread = 0.4;
  spec.size = 2000;
  const Dictionary db(GenerateCorpus(spec, 1), Metric::kEuclidean);
  spec.size = 1;
  const Vec d = GenerateCorpus(spec, 1, 2000).col(0);

  LiftingConfig lc;
  lc.m = 4;
  lc.database = &db;
  lc.rng_seed = 7;
  const LiftingRecord rec = Reparameterize(Lift(d, lc), 8);
  const AttackEstimate est = DatabaseAttack(StripGroundTruth(rec), {&db, lc.m, 64, 8});
  std::cout << "lifted to a " << rec.subspace.dim() << "-dim affine subspace in R^" << rec.subspace.ambient_dim()
            << "\n";
  std::cout << "database attack: recovered entries";
  for (uint32_t i : est.recovered_indices) std::cout << " " << i;
  std::cout << " (planted";
  for (uint32_t i : rec.adversarial_indices) std::cout << " " << i;
  std::cout << "), cosine(d_hat, d) = " << CosineSimilarity(est.d_hat, d) << "\n";

  const KMeansResult vocab = BuildSphericalKMeans(db.entries(), 64, 25, 3);
  LdpConfig cfg;
  cfg.epsilon = PrivacyBudget::Finite(2.0);
  cfg.m = 4;
  cfg.dictionary = &vocab.dictionary;
  CounterRng rng(11, 0);
  const PrivatizedFeature f = Privatize(d, cfg, rng);
  std::cout << "true word " << Nearest(vocab.dictionary, d).index << ", reported subset";
  for (uint32_t i : f.indices) std::cout << " " << i;
  std::cout << " (word kept with probability " << BernoulliP(cfg) << ")\n";
  return 0;
}
