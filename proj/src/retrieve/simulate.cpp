#include "eraloc/eval.hpp"
#include "eraloc/retrieve.hpp"
#include "eraloc/rng.hpp"

#include <cmath>
#include <iostream>

namespace eraloc {
namespace {

bool relevant_row(const RetrievalIndex& archive, Eigen::Index row, const std::string& label) {
  return !archive.is_distractor(row) && (*archive.labels())[static_cast<std::size_t>(row)] == label;
}

void mean_std(const std::vector<double>& v, double& m, double& s) {
  m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  s = std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::vector<std::string> oracle_select(const RetrievalIndex& archive, const std::vector<Hit>& results,
                                       const std::string& label, int count, double noise, std::uint64_t seed) {
  std::vector<Eigen::Index> chosen;
  auto taken = [&](Eigen::Index r) { return std::find(chosen.begin(), chosen.end(), r) != chosen.end(); };
  for (const auto& h : results) {
    if (static_cast<int>(chosen.size()) == count) break;
    if (relevant_row(archive, h.row, label)) chosen.push_back(h.row);
  }
  for (Eigen::Index r = 0; r < archive.size() && static_cast<int>(chosen.size()) < count; ++r)
    if (relevant_row(archive, r, label) && !taken(r)) chosen.push_back(r);
  if (static_cast<int>(chosen.size()) < count)
    fail(ErrorCode::InsufficientData, "fewer than " + std::to_string(count) + " relevant items for label " + label);
  if (noise > 0.0) {
    Rng rng(seed);
    for (auto& c : chosen) {
      if (rng.uniform() >= noise) continue;
      for (int attempt = 0; attempt < 10000; ++attempt) {
        auto r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(archive.size())));
        if (!relevant_row(archive, r, label) && !taken(r)) {
          c = r;
          break;
        }
      }
    }
  }
  std::vector<std::string> ids;
  for (auto r : chosen) ids.push_back(archive.id(r));
  return ids;
}

double held_out_map(const RetrievalIndex& archive, const FeatureMatrix& queries, const std::vector<std::size_t>& eval,
                    const std::function<std::vector<Eigen::Index>(const Vector&)>& ranker) {
  std::map<std::string, std::size_t> total;
  for (Eigen::Index r = 0; r < archive.size(); ++r)
    if (!archive.is_distractor(r)) ++total[(*archive.labels())[static_cast<std::size_t>(r)]];
  std::map<std::string, std::pair<double, int>> per_class;
  for (std::size_t qi : eval) {
    const std::string& label = (*queries.labels)[qi];
    auto order = ranker(queries.rows.row(static_cast<Eigen::Index>(qi)).transpose());
    std::vector<bool> hits(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) hits[r] = relevant_row(archive, order[r], label);
    auto& acc = per_class[label];
    acc.first += average_precision(hits, total[label]);
    ++acc.second;
  }
  if (per_class.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [label, acc] : per_class) s += acc.first / acc.second;
  return s / static_cast<double>(per_class.size());
}

std::vector<std::size_t> usable_queries(const FeatureMatrix& archive, const FeatureMatrix& queries, int feedback_size,
                                        std::size_t* skipped) {
  std::map<std::string, std::size_t> relevant_count;
  for (Eigen::Index r = 0; r < archive.size(); ++r)
    if (!archive.is_distractor(r)) ++relevant_count[(*archive.labels)[static_cast<std::size_t>(r)]];
  std::vector<std::size_t> usable;
  std::size_t dropped = 0;
  for (std::size_t q = 0; q < static_cast<std::size_t>(queries.size()); ++q) {
    if (relevant_count[(*queries.labels)[q]] >= static_cast<std::size_t>(feedback_size)) {
      usable.push_back(q);
    } else {
      std::cerr << "warning: query " << queries.ids[q] << " has fewer than " << feedback_size
                << " relevant items; skipped\n";
      ++dropped;
    }
  }
  if (skipped) *skipped = dropped;
  return usable;
}

std::uint64_t repetition_seed(const SimulationConfig& cfg, int rep) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> repetition_split(const std::vector<std::size_t>& usable,
                                                                               const SimulationConfig& cfg, int rep) {
  Rng rng(repetition_seed(cfg, rep));
  auto perm = rng.permutation(usable.size());
  std::vector<std::size_t> schedule, eval;
  for (std::size_t i = 0; i < perm.size(); ++i) (i < cfg.schedule_length ? schedule : eval).push_back(usable[perm[i]]);
  return {schedule, eval};
}

SessionReport simulate_session(const FeatureMatrix& archive, const FeatureMatrix& queries, const SimulationConfig& cfg) {
  if (!archive.has_labels() || !queries.has_labels())
    fail(ErrorCode::MissingLabels, "simulation needs labels on archive and queries");
  if (cfg.repetitions < 1) fail(ErrorCode::InvalidInput, "repetitions must be >= 1");
  auto index = std::make_shared<const RetrievalIndex>(RetrievalIndex::build(archive));

  SessionReport report;
  std::vector<std::size_t> usable = usable_queries(archive, queries, cfg.session.feedback_size, &report.skipped_queries);
  if (usable.size() <= cfg.schedule_length)
    fail(ErrorCode::InsufficientData, "schedule leaves no held-out queries for evaluation");

  auto raw_ranker = [&](const Vector& q) { return index->rank_all(q); };
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed = repetition_seed(cfg, rep);
    auto [schedule, eval] = repetition_split(usable, cfg, rep);

    RepetitionReport rr;
    rr.before = held_out_map(*index, queries, eval, raw_ranker);
    double current = rr.before;
    Session s(index, cfg.session);
    for (std::size_t step = 0; step < schedule.size(); ++step) {
      std::size_t qi = schedule[step];
      Vector v = queries.rows.row(static_cast<Eigen::Index>(qi)).transpose();
      const std::string& qid = queries.ids[qi];
      s = s.with_query(qid, v);
      auto hits = s.query(v, cfg.top_k);
      auto picks = oracle_select(*index, hits, (*queries.labels)[qi], cfg.session.feedback_size, cfg.noise,
                                 derive_seed(rep_seed, step + 1));
      auto before_alignment = s.alignment();
      s = s.record_feedback({qid, picks, 0}).advance();
      if (s.alignment() && s.alignment() != before_alignment) {
        if (!before_alignment) rr.trigger_queries = s.n_t();
        auto adapted = s.alignment()->index;
        current = held_out_map(*index, queries, eval, [&](const Vector& q) { return adapted->rank_all(q); });
      }
      rr.curve.push_back({step + 1, current, s.alignment() != nullptr});
    }
    rr.adapted = s.alignment() != nullptr;
    rr.after = current;
    if (rr.adapted) {
      rr.model_hash = s.alignment()->hash;
      rr.d_hat_s = s.alignment()->d_source;
      rr.d_hat_t = s.alignment()->d_target;
    } else if (s.d_hat_s()) {
      rr.d_hat_s = s.d_hat_s()->rounded;
      rr.d_hat_t = s.d_hat_t()->rounded;
    }
    rr.n_s = s.n_s();
    rr.n_t = s.n_t();
    rr.baseline = held_out_map(*index, queries, eval, [&](const Vector& q) { return index->rank_all(s.baseline_probe(q)); });
    report.reps.push_back(std::move(rr));
  }

  std::vector<double> b, a, n;
  for (const auto& r : report.reps) {
    b.push_back(r.before);
    a.push_back(r.after);
    n.push_back(r.baseline);
  }
  mean_std(b, report.before_mean, report.before_std);
  mean_std(a, report.after_mean, report.after_std);
  mean_std(n, report.baseline_mean, report.baseline_std);
  for (std::size_t step = 0; step < cfg.schedule_length; ++step) {
    CurvePoint p{step + 1, 0.0, true};
    for (const auto& r : report.reps) {
      p.map += r.curve[step].map;
      p.adapted = p.adapted && r.curve[step].adapted;
    }
    p.map /= static_cast<double>(report.reps.size());
    report.mean_curve.push_back(p);
  }
  return report;
}

}  // namespace eraloc
