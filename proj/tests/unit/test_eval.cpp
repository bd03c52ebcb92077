#include <doctest.h>

#include "eraloc/eval.hpp"
#include "eraloc/rng.hpp"

#include "../support/expect.hpp"
#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"

#include <algorithm>

using namespace eraloc;
using eraloc::testing::code_of;

namespace {

FeatureMatrix labeled(Matrix rows, const std::string& prefix, std::vector<std::string> labels,
                      Domain dom = Domain::Source) {
  FeatureMatrix f = make_features(std::move(rows), prefix, dom);
  f.labels = std::move(labels);
  return f;
}

std::map<std::string, std::string> truth_of(const FeatureMatrix& f) {
  std::map<std::string, std::string> t;
  for (std::size_t i = 0; i < f.ids.size(); ++i) t[f.ids[i]] = (*f.labels)[i];
  return t;
}

}  // namespace

TEST_CASE("nn with one training sample") {
  Rng rng(1);
  FeatureMatrix train = labeled(synth::gaussian(rng, 1, 4), "s", {"only"});
  FeatureMatrix test = make_features(synth::gaussian(rng, 9, 4), "t", Domain::Target);
  for (const auto& p : nn_classify(train, test, Metric::Euclidean)) {
    CHECK(p.predicted_label == "only");
    CHECK(p.nearest_source_id == "s0");
  }
}

TEST_CASE("nn ties go to the lower index") {
  Matrix tr(2, 1);
  tr << -1, 1;
  FeatureMatrix train = labeled(tr, "s", {"left", "right"});
  FeatureMatrix test = make_features(Matrix::Zero(1, 1), "t");
  CHECK(nn_classify(train, test, Metric::Euclidean)[0].predicted_label == "left");
}

TEST_CASE("nn matches brute force") {
  Rng rng(2);
  std::vector<std::string> labels;
  for (int i = 0; i < 50; ++i) labels.push_back("c" + std::to_string(rng.below(5)));
  FeatureMatrix train = labeled(synth::gaussian(rng, 50, 6), "s", labels);
  FeatureMatrix test = make_features(synth::gaussian(rng, 40, 6), "t");
  auto preds = nn_classify(train, test, Metric::Euclidean);
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    Eigen::Index j = oracle::brute_nearest(train.rows, test.rows.row(i).transpose());
    CHECK(preds[static_cast<std::size_t>(i)].nearest_source_id == train.ids[static_cast<std::size_t>(j)]);
    CHECK(preds[static_cast<std::size_t>(i)].predicted_label == labels[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("nn errors") {
  Rng rng(3);
  FeatureMatrix train = labeled(synth::gaussian(rng, 3, 4), "s", {"a", "b", "c"});
  FeatureMatrix test = make_features(synth::gaussian(rng, 2, 4), "t");
  CHECK(code_of([&] { nn_classify(train, test, Metric::EsaDist); }) == ErrorCode::MissingModel);
  CHECK(code_of([&] { nn_classify(train, test, Metric::GfkSim); }) == ErrorCode::MissingModel);
  CHECK(code_of([&] { nn_classify(train, make_features(synth::gaussian(rng, 2, 5)), Metric::Euclidean); }) ==
        ErrorCode::InvalidInput);
  FeatureMatrix unlabeled = make_features(synth::gaussian(rng, 3, 4));
  CHECK(code_of([&] { nn_classify(unlabeled, test, Metric::Euclidean); }) == ErrorCode::MissingLabels);
}

TEST_CASE("nn predictions ignore monotone transforms of the metric") {
  auto c = synth::make_shift_corpus(4, {4, 30, 6, 10, 5, 2, 5.0, 1.0, 0.5, 0.1});
  AlignmentModel m = learn_alignment(c.source, c.target, {AdaptMethod::Esa, 5, 5});
  auto by_dist = nn_classify(c.source, c.target, Metric::EsaDist, &m);
  // Scaling every coordinate by 3 and minimizing squared-distance ordering is
  // the same argmin; check via the brute-force oracle in the mapped space.
  Matrix a = map_source_rows(*m.sa, c.source.rows) * 3.0;
  Matrix b = map_target_rows(*m.sa, c.target.rows) * 3.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    Eigen::Index j = oracle::brute_nearest(a, b.row(i).transpose());
    CHECK(by_dist[static_cast<std::size_t>(i)].nearest_source_id == c.source.ids[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("metric direction flag") {
  auto c = synth::make_shift_corpus(5, {3, 20, 4, 8, 4, 2, 5.0, 1.0, 0.5, 0.1});
  AlignmentModel m = learn_alignment(c.source, c.target, {AdaptMethod::Sa, 4, 4});
  auto sim = nn_classify(c.source, c.target, Metric::SaSim, &m);
  auto sim_max = nn_classify(c.source, c.target, Metric::SaSim, &m, Direction::Maximize);
  auto sim_min = nn_classify(c.source, c.target, Metric::SaSim, &m, Direction::Minimize);
  for (std::size_t i = 0; i < sim.size(); ++i) {
    CHECK(sim[i].nearest_source_id == sim_max[i].nearest_source_id);
    CHECK(sim_min[i].score <= sim_max[i].score);
  }
}

TEST_CASE("accuracy") {
  std::vector<Prediction> p{{"a", "x", "s0", 0}, {"b", "y", "s1", 0}, {"c", "x", "s0", 0}, {"d", "x", "s0", 0}};
  std::map<std::string, std::string> all{{"a", "x"}, {"b", "y"}, {"c", "x"}, {"d", "x"}};
  CHECK(evaluate_accuracy(p, all) == 100.0);
  std::map<std::string, std::string> half{{"a", "x"}, {"b", "y"}, {"c", "z"}, {"d", "z"}};
  CHECK(evaluate_accuracy(p, half) == 50.0);
  std::reverse(p.begin(), p.end());
  CHECK(evaluate_accuracy(p, half) == 50.0);
  CHECK(code_of([&] { evaluate_accuracy(p, {{"a", "x"}}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("protocol repetitions and determinism") {
  Matrix s(3, 2), t(3, 2);
  s << 0, 0, 5, 5, 10, 0;
  t << 0.1, 0, 5, 4.9, 9, 0;
  FeatureMatrix src = labeled(s, "s", {"a", "b", "c"});
  FeatureMatrix tgt = labeled(t, "t", {"a", "b", "c"}, Domain::Target);
  ProtocolOptions opt;
  opt.repetitions = 2;
  auto r = run_protocol(src, tgt, opt);
  CHECK(r.repetitions == 2);
  CHECK(r.std_dev == 0.0);
  CHECK(r.mean_accuracy == 100.0);

  opt.samples_per_class = 0;
  opt.repetitions = 7;
  CHECK(run_protocol(src, tgt, opt).repetitions == 1);

  auto c = synth::make_shift_corpus(6, {5, 30, 6, 10, 5, 2, 5.0, 1.0, 0.5, 0.1});
  ProtocolOptions o2;
  o2.repetitions = 20;
  o2.seed = 9;
  auto a = run_protocol(c.source, c.target, o2);
  auto b = run_protocol(c.source, c.target, o2);
  CHECK(a.accuracies == b.accuracies);
  CHECK(a.mean_accuracy >= 0.0);
  CHECK(a.mean_accuracy <= 100.0);
  CHECK(a.std_dev >= 0.0);

  o2.samples_per_class = 11;
  CHECK(code_of([&] { run_protocol(c.source, c.target, o2); }) == ErrorCode::InsufficientData);
}

TEST_CASE("protocol learns the subspace from all samples once") {
  auto c = synth::make_shift_corpus(7, {5, 30, 6, 10, 5, 2, 5.0, 1.0, 0.5, 0.1});
  ProtocolOptions opt;
  opt.repetitions = 5;
  opt.metric = Metric::EsaDist;
  opt.adapt = {AdaptMethod::Esa, 4, 4};
  AlignmentModel m = learn_alignment(c.source, c.target, opt.adapt);
  CHECK(run_protocol(c.source, c.target, opt).accuracies == run_protocol(c.source, c.target, opt, m).accuracies);
}

TEST_CASE("average precision") {
  CHECK(average_precision({true, true, false, false}, 2) == 1.0);
  CHECK(average_precision({false, true, false}, 1) == 0.5);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<bool> hits;
    std::size_t rel = 0;
    for (int i = 0; i < 30; ++i) {
      bool h = rng.uniform() < 0.3;
      hits.push_back(h);
      rel += h;
    }
    std::size_t total = rel + rng.below(3);
    double ap = average_precision(hits, total);
    CHECK(ap == doctest::Approx(oracle::average_precision(hits, total)));
    // shuffling everything after the last relevant hit changes nothing
    auto last = std::find(hits.rbegin(), hits.rend(), true);
    std::vector<bool> padded(hits.begin(), last.base());
    padded.insert(padded.end(), 10, false);
    CHECK(average_precision(padded, total) == doctest::Approx(ap));
  }
}

TEST_CASE("mean average precision") {
  std::vector<std::vector<std::string>> rankings{{"a", "b", "c"}, {"x", "a", "b"}, {"a", "b", "c"}};
  std::vector<std::set<std::string>> rel{{"a"}, {"a"}, {"c"}};
  std::vector<std::string> cls{"k1", "k1", "k2"};
  auto r = mean_average_precision(rankings, rel, cls);
  CHECK(r.per_class["k1"] == doctest::Approx(0.75));
  CHECK(r.per_class["k2"] == doctest::Approx(1.0 / 3.0));
  CHECK(r.map == doctest::Approx((0.75 + 1.0 / 3.0) / 2));
  auto q = mean_average_precision(rankings, rel, cls, true);
  CHECK(q.map == doctest::Approx((1.0 + 0.5 + 1.0 / 3.0) / 3));

  std::vector<std::set<std::string>> perfect{{"a"}, {"x"}, {"a", "b"}};
  CHECK(mean_average_precision(rankings, perfect, cls).map == 1.0);

  std::vector<std::set<std::string>> with_empty{{"a"}, {}, {"a"}};
  auto e = mean_average_precision(rankings, with_empty, cls);
  CHECK(e.excluded == 1);
  CHECK(e.map == 1.0);
  CHECK(code_of([&] { mean_average_precision(rankings, rel, {"k"}); }) == ErrorCode::InvalidInput);
}

TEST_CASE("result tables keep the fixed column order") {
  std::string t = format_classification_table({{"HA", "rSIFT", "FV", "ESA", 56.12, 3.04, 70.0}});
  CHECK(t == "detector,descriptor,representation,classifier,acc_one_mean,acc_one_std,acc_all\n"
             "HA,rSIFT,FV,ESA,56.1,3.0,70.0\n");
  CHECK(format_retrieval_table({{"FV", 0.1644}}) == "representation,map\nFV,0.164\n");
}

TEST_CASE("metric names") {
  for (auto m : {Metric::Euclidean, Metric::SaSim, Metric::EsaDist, Metric::GfkSim}) CHECK(parse_metric(metric_name(m)) == m);
  CHECK(default_metric(AdaptMethod::Esa) == Metric::EsaDist);
  CHECK(default_metric(AdaptMethod::Gfk) == Metric::GfkSim);
  CHECK(code_of([] { parse_metric("cosine"); }) == ErrorCode::InvalidInput);
}
