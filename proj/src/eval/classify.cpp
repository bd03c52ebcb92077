#include "eraloc/eval.hpp"
#include "eraloc/rng.hpp"

#include <cmath>
#include <limits>

namespace eraloc {

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Euclidean: return "euclidean";
    case Metric::SaSim: return "sa";
    case Metric::EsaDist: return "esa";
    case Metric::GfkSim: return "gfk";
  }
  return "euclidean";
}

Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::Euclidean;
  if (s == "sa" || s == "sa-sim") return Metric::SaSim;
  if (s == "esa" || s == "esa-dist") return Metric::EsaDist;
  if (s == "gfk" || s == "gfk-sim") return Metric::GfkSim;
  fail(ErrorCode::InvalidInput, "unknown metric: " + s);
}

Metric default_metric(AdaptMethod m) {
  switch (m) {
    case AdaptMethod::None: return Metric::Euclidean;
    case AdaptMethod::Sa: return Metric::SaSim;
    case AdaptMethod::Esa: return Metric::EsaDist;
    case AdaptMethod::Gfk: return Metric::GfkSim;
  }
  return Metric::Euclidean;
}

std::vector<Prediction> nn_classify(const FeatureMatrix& train, const FeatureMatrix& test, Metric metric,
                                    const AlignmentModel* model, Direction dir) {
  if (train.size() == 0) fail(ErrorCode::InvalidInput, "training set is empty");
  if (!train.has_labels()) fail(ErrorCode::MissingLabels, "training set has no labels");
  if (train.dim() != test.dim()) fail(ErrorCode::InvalidInput, "train and test dimensions differ");

  Matrix a, b;  // train / test representations
  bool similarity = false;
  switch (metric) {
    case Metric::Euclidean:
      a = train.rows;
      b = test.rows;
      break;
    case Metric::SaSim:
    case Metric::EsaDist:
      if (!model || !model->sa) fail(ErrorCode::MissingModel, std::string("metric ") + metric_name(metric) + " needs an SA model");
      a = map_source_rows(*model->sa, train.rows);
      b = map_target_rows(*model->sa, test.rows);
      similarity = metric == Metric::SaSim;
      break;
    case Metric::GfkSim:
      if (!model || !model->gfk) fail(ErrorCode::MissingModel, "metric gfk needs a GFK model");
      if (model->gfk->g.rows() != train.dim()) fail(ErrorCode::InvalidInput, "kernel dimension mismatch");
      a = (train.rows.rowwise() - model->gfk->source_mean.transpose()) * model->gfk->g;
      b = test.rows.rowwise() - model->gfk->target_mean.transpose();
      similarity = true;
      break;
  }
  bool maximize = dir == Direction::Auto ? similarity : dir == Direction::Maximize;

  Matrix at = a.transpose();
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(test.size()));
  for (Eigen::Index t = 0; t < test.size(); ++t) {
    Vector q = b.row(t).transpose();
    Eigen::Index best_i = 0;
    double best = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < at.cols(); ++i) {
      double s = similarity ? at.col(i).dot(q) : (at.col(i) - q).norm();
      if (maximize ? s > best : s < best) {
        best = s;
        best_i = i;
      }
    }
    Prediction p;
    p.sample_id = test.ids[static_cast<std::size_t>(t)];
    p.predicted_label = (*train.labels)[static_cast<std::size_t>(best_i)];
    p.nearest_source_id = train.ids[static_cast<std::size_t>(best_i)];
    p.score = best;
    out.push_back(std::move(p));
  }
  return out;
}

double evaluate_accuracy(const std::vector<Prediction>& preds, const std::map<std::string, std::string>& truth) {
  if (preds.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& p : preds) {
    auto it = truth.find(p.sample_id);
    if (it == truth.end()) fail(ErrorCode::InvalidInput, "no ground truth for sample " + p.sample_id);
    if (it->second == p.predicted_label) ++ok;
  }
  return 100.0 * static_cast<double>(ok) / static_cast<double>(preds.size());
}

}  // namespace eraloc
