#include "ugg/hand_diff.hpp"

#include <cmath>

#include "ugg/common.hpp"

namespace ugg {
namespace {

constexpr double kNormEps = 1e-20;
constexpr double kSdfEps = 1e-18;

Tensor mat_tensor(const Mat3& m) {
  Tensor t({3, 3});
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t c = 0; c < 3; ++c) t[r * 3 + c] = m(r, c);
  return t;
}

Tensor col_tensor(const Vec3& v) { return Tensor({3, 1}, {v.x(), v.y(), v.z()}); }

Mat3 skew(const Vec3& a) {
  Mat3 k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return k;
}

Mat3 axis_angle_fixed(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

}  // namespace

Var rot6d_matrix_var(Tape& tape, Var r6) {
  check(r6.tape == &tape && r6.val().size() == 6, "rot6d var wants 6 floats on this tape");
  Var a1 = slice(r6, 0, 0, 3);
  Var a2 = slice(r6, 0, 3, 3);
  Var b1 = divide(a1, l2norm_lastdim(a1, kNormEps, true));
  Var d = dot_lastdim(a2, b1, true);
  Var v2 = sub(a2, mul(b1, d));
  Var b2 = divide(v2, l2norm_lastdim(v2, kNormEps, true));
  Var b3 = cross3(b1, b2);
  // rows of stack0 are the columns of R
  return transpose(stack0({b1, b2, b3}), {1, 0});
}

DiffFk fk_on_tape(Tape& tape, const HandSpec& spec, const DiffPose& pose) {
  check(pose.theta.val().size() == spec.dof(), "diff pose joint count mismatch");
  DiffFk fk;
  fk.R.reserve(spec.links.size());
  fk.t.reserve(spec.links.size());
  const Tensor I3 = mat_tensor(Mat3::Identity());

  Var R0 = matmul(rot6d_matrix_var(tape, pose.rot6d),
                  tape.constant(mat_tensor(axis_angle_fixed(spec.links[0].pre_rot))));
  fk.R.push_back(R0);
  fk.t.push_back(reshape(pose.trans, {3, 1}));

  for (size_t i = 1; i < spec.links.size(); ++i) {
    const HandLink& l = spec.links[i];
    Var Rp = fk.R[static_cast<size_t>(l.parent)];
    Var tp = fk.t[static_cast<size_t>(l.parent)];
    Var th = slice(pose.theta, 0, spec.joint_of(static_cast<int64_t>(i)), 1);  // [1]
    const Mat3 K = skew(l.axis);
    // Rodrigues: R = I + sin(th) K + (1 - cos(th)) K^2
    Var rot = add(tape.constant(I3), mul(tape.constant(mat_tensor(K)), sin_(th)));
    rot = add(rot, mul(tape.constant(mat_tensor(K * K)),
                       add_const(neg(cos_(th)), 1.0)));
    Var local = matmul(tape.constant(mat_tensor(axis_angle_fixed(l.pre_rot))), rot);
    fk.R.push_back(matmul(Rp, local));
    fk.t.push_back(add(tp, matmul(Rp, tape.constant(col_tensor(l.offset)))));
  }
  return fk;
}

Var hand_sdf_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, Var points) {
  const int64_t P = points.val().dim(0);
  check(points.val().rank() == 2 && points.val().dim(1) == 3, "hand_sdf_var wants [P,3]");
  std::vector<Var> per_link;
  per_link.reserve(spec.links.size());
  for (size_t i = 0; i < spec.links.size(); ++i) {
    const HandLink& l = spec.links[i];
    Var t_row = transpose(fk.t[i], {1, 0});                // [1,3]
    Var local = matmul(sub(points, t_row), fk.R[i]);       // rows q^T = (p-t)^T R
    Var z = slice(local, 1, 2, 1);                          // [P,1]
    Var clamped = sub(relu(z), relu(add_const(relu(z), -l.length)));
    Var dz = sub(z, clamped);
    Var xy = slice(local, 1, 0, 2);
    Var sq = add(sum_axis(square(xy), 1, true), square(dz));  // [P,1]
    Var d = add_const(sqrt_(add_const(sq, kSdfEps)), -l.radius);
    per_link.push_back(reshape(d, {P}));
  }
  (void)tape;
  return min_axis(stack0(per_link), 0, false);  // [P]
}

Var surface_points_var(Tape& tape, const DiffFk& fk, const std::vector<HandSurfacePoint>& samples) {
  check(!samples.empty(), "no surface samples");
  // batch consecutive samples that live on the same link
  std::vector<Var> chunks;
  size_t i = 0;
  while (i < samples.size()) {
    size_t j = i;
    while (j < samples.size() && samples[j].link == samples[i].link) ++j;
    Tensor local({static_cast<int64_t>(j - i), 3});
    for (size_t s = i; s < j; ++s) {
      local[(static_cast<int64_t>(s - i)) * 3 + 0] = samples[s].local.x();
      local[(static_cast<int64_t>(s - i)) * 3 + 1] = samples[s].local.y();
      local[(static_cast<int64_t>(s - i)) * 3 + 2] = samples[s].local.z();
    }
    const size_t link = static_cast<size_t>(samples[i].link);
    Var world = add(matmul(tape.constant(local), transpose(fk.R[link], {1, 0})),
                    transpose(fk.t[link], {1, 0}));
    chunks.push_back(world);
    i = j;
  }
  return chunks.size() == 1 ? chunks[0] : concat(chunks, 0);
}

Var joint_limit_loss_var(Tape& tape, const HandSpec& spec, Var theta) {
  const int64_t k = spec.dof();
  Tensor lo({k}), hi({k});
  for (int64_t j = 0; j < k; ++j) {
    lo[j] = spec.links[static_cast<size_t>(j + 1)].theta_min;
    hi[j] = spec.links[static_cast<size_t>(j + 1)].theta_max;
  }
  Var over = relu(sub(theta, tape.constant(hi)));
  Var under = relu(sub(tape.constant(lo), theta));
  return add(sum_all(over), sum_all(under));
}

Var self_penetration_var(Tape& tape, const HandSpec& spec, const DiffFk& fk,
                         const std::vector<HandSurfacePoint>& samples, double delta) {
  const int64_t S = static_cast<int64_t>(samples.size());
  Var X = surface_points_var(tape, fk, samples);            // [S,3]
  Var sq = sum_axis(square(X), 1, false);                   // [S]
  Var row = reshape(sq, {S, 1});
  Var col = reshape(sq, {1, S});
  Var d2 = sub(add(row, col), scale(matmul(X, transpose(X, {1, 0})), 2.0));
  Var d = sqrt_(add_const(relu(d2), 1e-12));
  Tensor mask({S, S});
  for (int64_t a = 0; a < S; ++a)
    for (int64_t b = 0; b < S; ++b)
      mask[a * S + b] =
          spec.adjacent(samples[static_cast<size_t>(a)].link, samples[static_cast<size_t>(b)].link)
              ? 0.0
              : 1.0;
  Var gap = relu(add_const(neg(d), delta));
  return sum_all(mul(gap, tape.constant(mask)));
}

Var contact_loss_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, const Tensor& anchors) {
  if (anchors.size() == 0) return tape.constant(Tensor::scalar(0.0));
  Var sdf = hand_sdf_var(tape, spec, fk, tape.constant(anchors));
  return sum_all(relu(sdf));
}

Var penetration_loss_var(Tape& tape, const HandSpec& spec, const DiffFk& fk, const Tensor& points,
                         bool literal_sign) {
  Var sdf = hand_sdf_var(tape, spec, fk, tape.constant(points));
  return sum_all(relu(literal_sign ? sdf : neg(sdf)));
}

}  // namespace ugg
