#include "eraloc/eval.hpp"
#include "eraloc/rng.hpp"

#include <cmath>

namespace eraloc {

ProtocolResult run_protocol(const FeatureMatrix& source, const FeatureMatrix& target, const ProtocolOptions& opt) {
  AlignmentModel model = learn_alignment(source, target, opt.adapt);
  return run_protocol(source, target, opt, model);
}

ProtocolResult run_protocol(const FeatureMatrix& source, const FeatureMatrix& target, const ProtocolOptions& opt,
                            const AlignmentModel& model) {
  if (!source.has_labels()) fail(ErrorCode::MissingLabels, "source set has no labels");
  if (!target.has_labels()) fail(ErrorCode::MissingLabels, "target labels are needed to score the protocol");
  if (opt.repetitions < 1) fail(ErrorCode::InvalidInput, "repetitions must be >= 1");

  std::map<std::string, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < source.size(); ++i) by_class[(*source.labels)[static_cast<std::size_t>(i)]].push_back(i);
  const bool all = opt.samples_per_class <= 0;
  if (!all)
    for (const auto& [label, members] : by_class)
      if (static_cast<int>(members.size()) < opt.samples_per_class)
        fail(ErrorCode::InsufficientData, "class " + label + " has " + std::to_string(members.size()) +
                                              " samples, fewer than " + std::to_string(opt.samples_per_class));

  std::map<std::string, std::string> truth;
  for (Eigen::Index i = 0; i < target.size(); ++i)
    truth[target.ids[static_cast<std::size_t>(i)]] = (*target.labels)[static_cast<std::size_t>(i)];

  ProtocolResult res;
  res.repetitions = all ? 1 : opt.repetitions;
  std::map<std::string, double> class_sum;
  std::map<std::string, int> class_n;
  for (int rep = 0; rep < res.repetitions; ++rep) {
    std::vector<Eigen::Index> pick;
    if (all) {
      for (Eigen::Index i = 0; i < source.size(); ++i) pick.push_back(i);
    } else {
      Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(rep)));
      for (const auto& [label, members] : by_class)
        for (std::size_t j : rng.sample(members.size(), static_cast<std::size_t>(opt.samples_per_class)))
          pick.push_back(members[j]);
    }
    FeatureMatrix train = source.subset(pick);
    auto preds = nn_classify(train, target, opt.metric, &model, opt.direction);
    res.accuracies.push_back(evaluate_accuracy(preds, truth));

    std::map<std::string, std::pair<int, int>> pc;
    for (const auto& p : preds) {
      auto& c = pc[truth[p.sample_id]];
      ++c.second;
      if (p.predicted_label == truth[p.sample_id]) ++c.first;
    }
    for (const auto& [label, c] : pc) {
      class_sum[label] += 100.0 * c.first / c.second;
      ++class_n[label];
    }
  }
  double m = 0.0;
  for (double a : res.accuracies) m += a;
  m /= static_cast<double>(res.accuracies.size());
  double v = 0.0;
  for (double a : res.accuracies) v += (a - m) * (a - m);
  res.mean_accuracy = m;
  res.std_dev = std::sqrt(v / static_cast<double>(res.accuracies.size()));
  for (const auto& [label, s] : class_sum) res.per_class_accuracy[label] = s / class_n[label];
  return res;
}

}  // namespace eraloc
