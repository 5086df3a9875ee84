#include "visex/eval.hpp"

#include <set>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/log.hpp"

namespace visex {

using nlohmann::json;

double harmonic_mean(double unseen, double seen) {
  const double s = unseen + seen;
  return s > 0.0 ? 2.0 * unseen * seen / s : 0.0;
}

EvalReport report_from_predictions(const std::vector<std::pair<std::string, std::string>>& outcomes,
                                   const std::vector<std::string>& candidates,
                                   const std::string& split_name) {
  if (outcomes.empty()) throw ValidationError("empty test set");
  EvalReport r;
  r.split = split_name;
  std::size_t correct = 0;
  for (const auto& [truth, pred] : outcomes) {
    ++r.per_class_total[truth];
    const bool hit = truth == pred;
    r.per_class_correct[truth] += hit;
    correct += hit;
  }
  double sum = 0.0;
  for (const auto& [cls, total] : r.per_class_total) {
    const double acc = static_cast<double>(r.per_class_correct[cls]) / static_cast<double>(total);
    r.per_class[cls] = acc;
    sum += acc;
  }
  r.images = outcomes.size();
  r.per_class_top1 = sum / static_cast<double>(r.per_class.size());
  r.per_sample_top1 = static_cast<double>(correct) / static_cast<double>(outcomes.size());
  for (const auto& c : std::set<std::string>(candidates.begin(), candidates.end())) {
    if (!r.per_class_total.count(c)) r.excluded_classes.push_back(c);
  }
  if (!r.excluded_classes.empty()) {
    log::warn(split_name + ": " + std::to_string(r.excluded_classes.size()) +
              " candidate classes have no test images and are excluded from the per-class mean");
  }
  return r;
}

EvalReport evaluate(const DeviseModel& model, const std::vector<ImageRecord>& images,
                    const RepresentationSet& reps, const std::vector<std::string>& candidates,
                    const std::string& split_name) {
  if (images.empty()) throw ValidationError("empty test set");
  const auto preds = predict_batch(model, images, candidates, reps);
  std::vector<std::pair<std::string, std::string>> outcomes;
  outcomes.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) outcomes.emplace_back(images[i].class_id, preds[i]);
  return report_from_predictions(outcomes, candidates, split_name);
}

EvalReport evaluate_gzsl(const DeviseModel& model, const std::vector<ImageRecord>& seen_images,
                         const std::vector<ImageRecord>& unseen_images,
                         const RepresentationSet& reps, const ClassSplit& split) {
  if (seen_images.empty() || unseen_images.empty()) {
    throw ValidationError("generalized evaluation needs both seen and unseen test images");
  }
  for (const auto& img : seen_images) {
    if (!split.is_seen(img.class_id)) throw ValidationError("image " + img.image_id + " is not from a seen class");
  }
  for (const auto& img : unseen_images) {
    if (!split.is_unseen(img.class_id)) throw ValidationError("image " + img.image_id + " is not from an unseen class");
  }
  // One prediction per image over every class; U and S average over their own classes.
  const auto candidates = split.all_classes();
  std::vector<ImageRecord> all(seen_images);
  all.insert(all.end(), unseen_images.begin(), unseen_images.end());
  const auto predicted = predict_batch(model, all, candidates, reps);
  std::vector<std::pair<std::string, std::string>> both, seen_out, unseen_out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    both.emplace_back(all[i].class_id, predicted[i]);
    (i < seen_images.size() ? seen_out : unseen_out).emplace_back(all[i].class_id, predicted[i]);
  }
  const std::vector<std::string> seen(split.seen.begin(), split.seen.end());
  const std::vector<std::string> unseen(split.unseen.begin(), split.unseen.end());
  const EvalReport u = report_from_predictions(unseen_out, unseen, "gzsl-unseen");
  const EvalReport s = report_from_predictions(seen_out, seen, "gzsl-seen");
  EvalReport r = report_from_predictions(both, candidates, "gzsl");
  r.gzsl = GzslScores{u.per_class_top1, s.per_class_top1,
                      harmonic_mean(u.per_class_top1, s.per_class_top1)};
  return r;
}

std::vector<std::string> hop_classes(const ClassSplit& split, Hop hop) {
  std::vector<std::string> out;
  for (const auto& c : split.unseen) {
    auto it = split.hop_tags.find(c);
    if (it == split.hop_tags.end()) throw ValidationError("unseen class '" + c + "' has no hop tag");
    if (static_cast<int>(it->second) <= static_cast<int>(hop)) out.push_back(c);
  }
  return out;
}

std::map<Hop, EvalReport> hop_breakdown(const DeviseModel& model,
                                        const std::vector<ImageRecord>& unseen_images,
                                        const RepresentationSet& reps, const ClassSplit& split) {
  std::map<Hop, EvalReport> out;
  for (Hop hop : {Hop::two_hop, Hop::three_hop, Hop::all}) {
    const auto classes = hop_classes(split, hop);
    if (classes.empty()) continue;
    const std::set<std::string> members(classes.begin(), classes.end());
    std::vector<ImageRecord> images;
    for (const auto& img : unseen_images) {
      if (members.count(img.class_id)) images.push_back(img);
    }
    if (images.empty()) {
      log::warn("hop " + to_string(hop) + " has no test images");
      continue;
    }
    out.emplace(hop, evaluate(model, images, reps, classes, to_string(hop)));
  }
  return out;
}

std::string eval_report_json(const EvalReport& report) {
  json obj;
  obj["split"] = report.split;
  obj["per_class_top1"] = report.per_class_top1;
  obj["per_sample_top1"] = report.per_sample_top1;
  obj["images"] = report.images;
  json per = json::object();
  for (const auto& [cls, acc] : report.per_class) {
    per[cls] = {{"accuracy", acc},
                {"correct", report.per_class_correct.at(cls)},
                {"total", report.per_class_total.at(cls)}};
  }
  obj["per_class"] = per;
  obj["excluded_classes"] = report.excluded_classes;
  if (report.gzsl) {
    obj["gzsl"] = {{"U", report.gzsl->unseen}, {"S", report.gzsl->seen}, {"H", report.gzsl->harmonic}};
  }
  return obj.dump(2) + "\n";
}

}  // namespace visex
