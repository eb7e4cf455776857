#include "ugg/contact.hpp"

#include <algorithm>

#include "ugg/common.hpp"

namespace ugg {

ContactAnchors extract_anchors(const PointCloud& object, const HandSpec& spec,
                               const HandPose& pose, double eta, int64_t n_c, RngStream& stream) {
  object.validate();
  check(eta > 0.0 && n_c >= 1, "extract_anchors wants eta > 0 and n_c >= 1");
  const auto fk = forward_kinematics(spec, pose);
  std::vector<int64_t> cand;
  for (int64_t i = 0; i < object.size(); ++i) {
    const double d = std::max(hand_sdf(spec, fk, object.point(i)), 0.0);
    if (d < eta) cand.push_back(i);
  }
  ContactAnchors out;
  if (cand.empty()) return out;

  std::vector<int64_t> chosen;
  if (static_cast<int64_t>(cand.size()) >= n_c) {
    // without replacement: partial Fisher-Yates over the candidate list
    for (int64_t i = 0; i < n_c; ++i) {
      const int64_t j = i + stream.uniform_int(static_cast<int64_t>(cand.size()) - i);
      std::swap(cand[static_cast<size_t>(i)], cand[static_cast<size_t>(j)]);
      chosen.push_back(cand[static_cast<size_t>(i)]);
    }
  } else {
    for (int64_t i = 0; i < n_c; ++i)
      chosen.push_back(cand[static_cast<size_t>(stream.uniform_int(static_cast<int64_t>(cand.size())))]);
  }
  out.found = true;
  out.points = Tensor({n_c, 3});
  for (int64_t i = 0; i < n_c; ++i) {
    const Vec3 p = object.point(chosen[static_cast<size_t>(i)]);
    out.points[i * 3] = p.x();
    out.points[i * 3 + 1] = p.y();
    out.points[i * 3 + 2] = p.z();
  }
  return out;
}

double contact_loss(const ContactAnchors& anchors, const HandSpec& spec, const HandPose& pose) {
  if (!anchors.found || anchors.points.size() == 0) return 0.0;
  const auto fk = forward_kinematics(spec, pose);
  double loss = 0.0;
  for (int64_t i = 0; i < anchors.points.dim(0); ++i) {
    const Vec3 p(anchors.points[i * 3], anchors.points[i * 3 + 1], anchors.points[i * 3 + 2]);
    loss += std::max(hand_sdf(spec, fk, p), 0.0);
  }
  return loss;
}

}  // namespace ugg
