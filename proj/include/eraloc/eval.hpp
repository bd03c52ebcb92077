#pragma once

#include "eraloc/adapt.hpp"
#include "eraloc/common.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace eraloc {

enum class Metric { Euclidean, SaSim, EsaDist, GfkSim };
const char* metric_name(Metric m);
Metric parse_metric(const std::string& s);
Metric default_metric(AdaptMethod m);

// Auto follows the equations: distances are minimized, similarities maximized.
enum class Direction { Auto, Minimize, Maximize };

struct Prediction {
  std::string sample_id;
  std::string predicted_label;
  std::string nearest_source_id;
  double score = 0.0;
};

std::vector<Prediction> nn_classify(const FeatureMatrix& train, const FeatureMatrix& test, Metric metric,
                                    const AlignmentModel* model = nullptr, Direction dir = Direction::Auto);

double evaluate_accuracy(const std::vector<Prediction>& preds, const std::map<std::string, std::string>& truth);

struct ProtocolOptions {
  int samples_per_class = 1;  // 0 = all
  int repetitions = 100;
  std::uint64_t seed = 0;
  Metric metric = Metric::Euclidean;
  Direction direction = Direction::Auto;
  AdaptConfig adapt{AdaptMethod::None};
};

struct ProtocolResult {
  double mean_accuracy = 0.0;
  double std_dev = 0.0;  // population standard deviation over repetitions
  int repetitions = 0;
  std::map<std::string, double> per_class_accuracy;
  std::vector<double> accuracies;
};

// Target labels are required for scoring only.
ProtocolResult run_protocol(const FeatureMatrix& source, const FeatureMatrix& target, const ProtocolOptions& opt);
// Same protocol with an already learned model.
ProtocolResult run_protocol(const FeatureMatrix& source, const FeatureMatrix& target, const ProtocolOptions& opt,
                            const AlignmentModel& model);

// hits[i] tells whether the item at rank i is relevant.
double average_precision(const std::vector<bool>& hits, std::size_t total_relevant);

struct MapResult {
  double map = 0.0;
  std::map<std::string, double> per_class;
  std::size_t excluded = 0;  // queries without relevant items
};

MapResult mean_average_precision(const std::vector<std::vector<std::string>>& rankings,
                                 const std::vector<std::set<std::string>>& relevant,
                                 const std::vector<std::string>& classes, bool per_query = false);

// Result table rows. Column order is fixed.
struct ClassificationRow {
  std::string detector, descriptor, representation, classifier;
  double acc_one_mean = 0.0, acc_one_std = 0.0, acc_all = 0.0;
};
std::string format_classification_table(const std::vector<ClassificationRow>& rows);

struct RetrievalRow {
  std::string representation;
  double map = 0.0;
};
std::string format_retrieval_table(const std::vector<RetrievalRow>& rows);

}  // namespace eraloc
