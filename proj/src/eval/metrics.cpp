#include "eraloc/eval.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

namespace eraloc {

double average_precision(const std::vector<bool>& hits, std::size_t total_relevant) {
  if (total_relevant == 0) return 0.0;
  std::size_t found = 0;
  double acc = 0.0;
  for (std::size_t r = 0; r < hits.size(); ++r)
    if (hits[r]) {
      ++found;
      acc += static_cast<double>(found) / static_cast<double>(r + 1);
    }
  return acc / static_cast<double>(total_relevant);
}

MapResult mean_average_precision(const std::vector<std::vector<std::string>>& rankings,
                                 const std::vector<std::set<std::string>>& relevant,
                                 const std::vector<std::string>& classes, bool per_query) {
  if (rankings.size() != relevant.size() || rankings.size() != classes.size())
    fail(ErrorCode::InvalidInput, "rankings, relevance sets and classes differ in length");
  MapResult res;
  std::map<std::string, std::pair<double, int>> acc;
  double total = 0.0;
  int used = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (relevant[q].empty()) {
      std::cerr << "warning: query " << q << " has no relevant items; excluded from mAP\n";
      ++res.excluded;
      continue;
    }
    std::vector<bool> hits;
    hits.reserve(rankings[q].size());
    for (const auto& id : rankings[q]) hits.push_back(relevant[q].count(id) > 0);
    double ap = average_precision(hits, relevant[q].size());
    auto& a = acc[classes[q]];
    a.first += ap;
    ++a.second;
    total += ap;
    ++used;
  }
  for (const auto& [c, a] : acc) res.per_class[c] = a.first / a.second;
  if (per_query) {
    res.map = used ? total / used : 0.0;
  } else {
    double s = 0.0;
    for (const auto& [c, v] : res.per_class) s += v;
    res.map = res.per_class.empty() ? 0.0 : s / static_cast<double>(res.per_class.size());
  }
  return res;
}

namespace {
std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}
}  // namespace

std::string format_classification_table(const std::vector<ClassificationRow>& rows) {
  std::ostringstream os;
  os << "detector,descriptor,representation,classifier,acc_one_mean,acc_one_std,acc_all\n";
  for (const auto& r : rows)
    os << r.detector << ',' << r.descriptor << ',' << r.representation << ',' << r.classifier << ','
       << fmt(r.acc_one_mean, 1) << ',' << fmt(r.acc_one_std, 1) << ',' << fmt(r.acc_all, 1) << '\n';
  return os.str();
}

std::string format_retrieval_table(const std::vector<RetrievalRow>& rows) {
  std::ostringstream os;
  os << "representation,map\n";
  for (const auto& r : rows) os << r.representation << ',' << fmt(r.map, 3) << '\n';
  return os.str();
}

}  // namespace eraloc
