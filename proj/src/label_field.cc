#include "masklift/label_field.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <ostream>

#include "masklift/error.h"
#include "masklift/io.h"
#include "masklift/parallel.h"

namespace masklift {
namespace {

// Samples whose compositing weight falls below this contribute nothing
// measurable to logits or gradients and are skipped.
constexpr double kWeightCutoff = 1e-14;

void softmax_inplace(Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  z = (z.array() - top).exp();
  z /= z.sum();
}

}  // namespace

LabelField::LabelField(const Aabb& bounds, std::vector<Resolution> resolutions,
                       Label label_count)
    : bounds_(bounds), resolutions_(std::move(resolutions)), label_count_(label_count) {
  if (!((bounds_.max.array() > bounds_.min.array()).all())) {
    fail(ErrorCode::kBadParams, "field bounds must have positive extent");
  }
  if (resolutions_.empty()) fail(ErrorCode::kBadParams, "field needs at least one level");
  for (const auto& r : resolutions_) {
    for (int n : r) {
      if (n < 2) fail(ErrorCode::kBadParams, "level resolution must be >= 2 per axis");
    }
  }
  for (std::size_t l = 0; l < resolutions_.size(); ++l) {
    density_.emplace_back(node_count(l), 0.0f);
    logits_.emplace_back(node_count(l) * channels(), 0.0f);
  }
}

std::size_t LabelField::node_count(std::size_t level) const {
  const auto& r = resolutions_[level];
  return static_cast<std::size_t>(r[0]) * r[1] * r[2];
}

std::size_t LabelField::node_index(std::size_t level, int i, int j, int k) const {
  const auto& r = resolutions_[level];
  return (static_cast<std::size_t>(k) * r[1] + j) * r[0] + i;
}

Vec3 LabelField::node_position(std::size_t level, int i, int j, int k) const {
  const auto& r = resolutions_[level];
  const Vec3 cell = bounds_.extent().cwiseQuotient(Vec3(r[0], r[1], r[2]));
  return bounds_.min + cell.cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
}

std::array<LabelField::Corner, 8> LabelField::stencil(std::size_t level, const Vec3& p) const {
  const auto& r = resolutions_[level];
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double g = std::clamp((p[a] - bounds_.min[a]) / (bounds_.max[a] - bounds_.min[a]) * r[a] - 0.5,
                                0.0, static_cast<double>(r[a] - 1));
    base[a] = std::min(static_cast<int>(g), r[a] - 2);
    frac[a] = g - base[a];
  }
  std::array<Corner, 8> out;
  for (int c = 0; c < 8; ++c) {
    const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
    out[c].node = node_index(level, base[0] + di, base[1] + dj, base[2] + dk);
    out[c].weight = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                    (dk ? frac[2] : 1.0 - frac[2]);
  }
  return out;
}

double LabelField::density_at(const Vec3& p) const {
  if (!in_bounds(p)) return 0.0;
  double sigma = 0.0;
  for (std::size_t l = 0; l < level_count(); ++l) {
    const auto& d = density_[l];
    for (const auto& c : stencil(l, p)) sigma += c.weight * d[c.node];
  }
  return std::max(0.0, sigma);
}

void LabelField::logits_at(const Vec3& p, std::span<double> out, double background_logit) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (!in_bounds(p)) {
    out[0] = background_logit;
    return;
  }
  const int ch = channels();
  for (std::size_t l = 0; l < level_count(); ++l) {
    const float* data = logits_[l].data();
    for (const auto& c : stencil(l, p)) {
      if (c.weight == 0.0) continue;
      const float* node = data + c.node * ch;
      for (int k = 0; k < ch; ++k) out[k] += c.weight * node[k];
    }
  }
}

FieldSample sample_field(const LabelField& field, const Vec3& point, double background_logit) {
  FieldSample s;
  s.sigma = field.density_at(point);
  s.logits.resize(field.channels());
  field.logits_at(point, {s.logits.data(), static_cast<std::size_t>(s.logits.size())},
                  background_logit);
  return s;
}

void RenderConfig::validate() const {
  if (samples_per_ray < 2) fail(ErrorCode::kBadParams, "samples_per_ray must be >= 2");
  if (!(near < far) || near < 0.0) fail(ErrorCode::kBadParams, "need 0 <= near < far");
}

CompositeTrace trace_ray(const LabelField& field, const Ray& ray, const RenderConfig& cfg,
                         CounterRng* jitter) {
  CompositeTrace tr;
  const auto hit = field.bounds().intersect(ray);
  if (!hit) return tr;
  const double t0 = std::max(hit->first, cfg.near);
  const double t1 = std::min(hit->second, cfg.far);
  if (!(t1 > t0)) return tr;
  const int n = cfg.samples_per_ray;
  const double delta = (t1 - t0) / n;
  tr.t.resize(n);
  tr.delta.assign(n, delta);
  tr.sigma.resize(n);
  tr.alpha.resize(n);
  tr.transmittance.resize(n);
  tr.weight.resize(n);
  double trans = 1.0;
  for (int s = 0; s < n; ++s) {
    const double u = jitter ? jitter->uniform() : 0.5;
    tr.t[s] = t0 + (s + u) * delta;
    tr.sigma[s] = field.density_at(ray.at(tr.t[s]));
    tr.alpha[s] = 1.0 - std::exp(-tr.sigma[s] * delta);
    tr.transmittance[s] = trans;
    tr.weight[s] = trans * tr.alpha[s];
    trans *= 1.0 - tr.alpha[s];
  }
  return tr;
}

namespace {

// Rendered logits for a traced ray: sum_s w_s l(x_s) + (1 - W) b.
Eigen::VectorXd composite_logits(const LabelField& field, const Ray& ray,
                                 const CompositeTrace& tr, double background_logit,
                                 double& weight_sum) {
  const int ch = field.channels();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(ch);
  Eigen::VectorXd l(ch);
  weight_sum = 0.0;
  for (std::size_t s = 0; s < tr.t.size(); ++s) {
    weight_sum += tr.weight[s];
    if (tr.weight[s] < kWeightCutoff) continue;
    field.logits_at(ray.at(tr.t[s]), {l.data(), static_cast<std::size_t>(ch)}, background_logit);
    z += tr.weight[s] * l;
  }
  z[0] += (1.0 - weight_sum) * background_logit;
  return z;
}

}  // namespace

RayRender render_ray(const LabelField& field, const Ray& ray, const RenderConfig& cfg,
                     CounterRng* jitter) {
  const CompositeTrace tr = trace_ray(field, ray, cfg, jitter);
  RayRender out;
  out.distribution = composite_logits(field, ray, tr, cfg.background_logit, out.weight_sum);
  softmax_inplace(out.distribution);
  double depth_num = 0.0;
  for (std::size_t s = 0; s < tr.t.size(); ++s) depth_num += tr.weight[s] * tr.t[s];
  out.expected_depth = depth_num / std::max(out.weight_sum, 1e-10);
  return out;
}

RenderedView render_view(const LabelField& field, const Camera& camera, const RenderConfig& cfg,
                         int downsample) {
  cfg.validate();
  const Intrinsics k = camera.intrinsics.downsampled(downsample);
  RenderedView view;
  view.labels = LabelImage(k.width, k.height, 0);
  view.max_probability = Image<float>(k.width, k.height, 0.0f);
  parallel_for(static_cast<std::size_t>(k.height), [&](std::size_t row) {
    for (int col = 0; col < k.width; ++col) {
      const Ray ray = pixel_ray(Vec2(col, static_cast<double>(row)), camera.pose, k);
      const RayRender r = render_ray(field, ray, cfg);
      Eigen::Index best = 0;
      const double p = r.distribution.maxCoeff(&best);
      view.labels.at(static_cast<int>(row), col) = static_cast<Label>(best);
      view.max_probability.at(static_cast<int>(row), col) = static_cast<float>(p);
    }
  });
  return view;
}

namespace {

std::size_t matching_level(const LabelField& field, const VoxelLabels& oracle) {
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    if (field.resolution(l) == oracle.resolution) return l;
  }
  fail(ErrorCode::kShapeMismatch, "no field level matches the oracle resolution");
}

}  // namespace

void paint_from_oracle(LabelField& field, const VoxelLabels& oracle,
                       const std::map<Label, Label>& label_map, double sigma, double logit) {
  const std::size_t level = matching_level(field, oracle);
  for (Label id : oracle.labels) {
    if (id == 0) continue;
    const auto it = label_map.find(id);
    if (it == label_map.end()) {
      fail(ErrorCode::kUnmappedId, "ground-truth id " + std::to_string(id) + " has no label");
    }
    if (it->second > field.label_count()) {
      fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(it->second));
    }
  }
  const int ch = field.channels();
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    std::fill(field.density(l).begin(), field.density(l).end(), 0.0f);
    std::fill(field.logits(l).begin(), field.logits(l).end(), 0.0f);
  }
  // Empty voxels keep zero logits: they carry no weight, and a background
  // one-hot there would bleed into surface samples through interpolation.
  auto& d = field.density(level);
  auto& g = field.logits(level);
  for (std::size_t n = 0; n < oracle.labels.size(); ++n) {
    const Label id = oracle.labels[n];
    if (id == 0) continue;
    d[n] = static_cast<float>(sigma);
    for (int c = 0; c < ch; ++c) g[n * ch + c] = static_cast<float>(-logit);
    g[n * ch + label_map.at(id)] = static_cast<float>(logit);
  }
}

void paint_density_from_oracle(LabelField& field, const VoxelLabels& oracle, double sigma) {
  const std::size_t level = matching_level(field, oracle);
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    auto& d = field.density(l);
    std::fill(d.begin(), d.end(), 0.0f);
  }
  auto& d = field.density(level);
  for (std::size_t n = 0; n < oracle.labels.size(); ++n) {
    if (oracle.labels[n] != 0) d[n] = static_cast<float>(sigma);
  }
}

void TrainConfig::validate() const {
  if (iterations < 0 || rays_per_batch < 1) fail(ErrorCode::kBadParams, "bad training counts");
  if (!(lr_density > 0.0) || !(lr_labels > 0.0)) {
    fail(ErrorCode::kBadParams, "learning rates must be positive");
  }
  if (background_fraction < 0.0 || background_fraction > 1.0) {
    fail(ErrorCode::kBadParams, "background_fraction must lie in [0, 1]");
  }
}

namespace {

// Per-ray label gradient in factored form: every touched node receives
// scale * g, with g = (p - onehot) / N shared across the ray.
struct NodeScale {
  std::uint32_t level;
  std::size_t node;
  double scale;
};

struct RayLabelGrad {
  std::vector<NodeScale> nodes;
  Eigen::VectorXd g;
};

double label_loss_factored(const LabelField& field, std::span<const SupervisedRay> rays,
                           const RenderConfig& cfg, std::vector<RayLabelGrad>* grads,
                           std::span<const std::uint64_t> jitter_keys) {
  if (rays.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(rays.size());
  std::vector<double> losses(rays.size(), 0.0);
  if (grads) grads->resize(rays.size());
  for (const auto& sr : rays) {
    if (sr.target > field.label_count()) {
      fail(ErrorCode::kLabelOutOfRange, "target " + std::to_string(sr.target));
    }
  }

  parallel_for(rays.size(), [&](std::size_t r) {
    const SupervisedRay& sr = rays[r];
    std::optional<CounterRng> jitter;
    if (r < jitter_keys.size()) jitter.emplace(jitter_keys[r]);
    const CompositeTrace tr = trace_ray(field, sr.ray, cfg, jitter ? &*jitter : nullptr);
    double weight_sum = 0.0;
    Eigen::VectorXd p = composite_logits(field, sr.ray, tr, cfg.background_logit, weight_sum);
    softmax_inplace(p);
    losses[r] = -std::log(std::max(p[sr.target], 1e-300));
    if (!grads) return;
    // d(mean CE)/d(rendered logits) = (p - onehot) / N; logits enter the
    // render linearly with weight w_s, density held fixed.
    RayLabelGrad& out = (*grads)[r];
    out.nodes.clear();
    out.g = p;
    out.g[sr.target] -= 1.0;
    out.g *= inv_n;
    for (std::size_t s = 0; s < tr.t.size(); ++s) {
      if (tr.weight[s] < kWeightCutoff) continue;
      const Vec3 x = sr.ray.at(tr.t[s]);
      if (!field.in_bounds(x)) continue;
      for (std::size_t l = 0; l < field.level_count(); ++l) {
        for (const auto& c : field.stencil(l, x)) {
          if (c.weight == 0.0) continue;
          out.nodes.push_back({static_cast<std::uint32_t>(l), c.node, tr.weight[s] * c.weight});
        }
      }
    }
  });

  double total = 0.0;
  for (double l : losses) total += l;
  return total * inv_n;
}

}  // namespace

double label_loss(const LabelField& field, std::span<const SupervisedRay> rays,
                  const RenderConfig& cfg, std::vector<GradEntry>* gradient,
                  std::span<const std::uint64_t> jitter_keys) {
  std::vector<RayLabelGrad> grads;
  const double loss =
      label_loss_factored(field, rays, cfg, gradient ? &grads : nullptr, jitter_keys);
  if (gradient) {
    const int ch = field.channels();
    for (const auto& rg : grads) {
      for (const auto& n : rg.nodes) {
        for (int k = 0; k < ch; ++k) gradient->push_back({n.level, n.node * ch + k, n.scale * rg.g[k]});
      }
    }
  }
  return loss;
}

double density_loss(const LabelField& field, std::span<const SupervisedRay> rays,
                    const RenderConfig& cfg, double depth_weight,
                    std::vector<GradEntry>* gradient,
                    std::span<const std::uint64_t> jitter_keys) {
  if (rays.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(rays.size());
  std::vector<double> losses(rays.size(), 0.0);
  std::vector<std::vector<GradEntry>> per_ray(gradient ? rays.size() : 0);

  parallel_for(rays.size(), [&](std::size_t r) {
    const SupervisedRay& sr = rays[r];
    std::optional<CounterRng> jitter;
    if (r < jitter_keys.size()) jitter.emplace(jitter_keys[r]);
    const CompositeTrace tr = trace_ray(field, sr.ray, cfg, jitter ? &*jitter : nullptr);
    const std::size_t n = tr.t.size();
    double w_sum = 0.0, num = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      w_sum += tr.weight[s];
      num += tr.weight[s] * tr.t[s];
    }
    const bool has_depth_term = sr.depth_t.has_value() && w_sum > 1e-10;
    const double depth = num / std::max(w_sum, 1e-10);
    double dl_dw = 0.0, dl_dd = 0.0;
    if (sr.depth_t) {
      losses[r] = (w_sum - 1.0) * (w_sum - 1.0);
      dl_dw = 2.0 * (w_sum - 1.0);
      if (has_depth_term) {
        const double rel = (depth - *sr.depth_t) / *sr.depth_t;
        losses[r] += depth_weight * rel * rel;
        dl_dd = 2.0 * depth_weight * rel / *sr.depth_t;
      }
    } else {
      losses[r] = w_sum * w_sum;
      dl_dw = 2.0 * w_sum;
    }
    if (!gradient || n == 0) return;

    // Suffix sums of w_k and w_k t_k over k > s.
    std::vector<double> tail_w(n + 1, 0.0), tail_wt(n + 1, 0.0);
    for (std::size_t s = n; s > 0; --s) {
      tail_w[s - 1] = tail_w[s] + tr.weight[s - 1];
      tail_wt[s - 1] = tail_wt[s] + tr.weight[s - 1] * tr.t[s - 1];
    }
    auto& out = per_ray[r];
    for (std::size_t s = 0; s < n; ++s) {
      const double t_next = tr.transmittance[s] * (1.0 - tr.alpha[s]);
      if (t_next < kWeightCutoff && tr.weight[s] < kWeightCutoff) break;
      const double dw = tr.delta[s] * (t_next - tail_w[s + 1]);
      const double dnum = tr.delta[s] * (t_next * tr.t[s] - tail_wt[s + 1]);
      double g = dl_dw * dw;
      if (has_depth_term) g += dl_dd * (dnum - depth * dw) / w_sum;
      g *= inv_n;
      if (g == 0.0) continue;
      const Vec3 x = sr.ray.at(tr.t[s]);
      if (!field.in_bounds(x)) continue;
      for (std::size_t l = 0; l < field.level_count(); ++l) {
        for (const auto& c : field.stencil(l, x)) {
          if (c.weight != 0.0) out.push_back({static_cast<std::uint32_t>(l), c.node, g * c.weight});
        }
      }
    }
  });

  double total = 0.0;
  for (double l : losses) total += l;
  if (gradient) {
    for (auto& entries : per_ray) gradient->insert(gradient->end(), entries.begin(), entries.end());
  }
  return total * inv_n;
}

std::vector<LossRecord> train(LabelField& field, const std::vector<TrainingView>& views,
                              const TrainConfig& train_cfg, const RenderConfig& render_cfg) {
  train_cfg.validate();
  render_cfg.validate();
  const bool depth_mode = train_cfg.density_mode == DensityMode::kDepthSupervised;

  struct PixelRef {
    std::uint32_t view;
    std::uint32_t index;
  };
  std::vector<PixelRef> fg, bg;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& img = views[v].pseudolabels;
    const auto& k = views[v].camera.intrinsics;
    if (img.width != k.width || img.height != k.height) {
      fail(ErrorCode::kShapeMismatch, "pseudolabel image does not match its camera");
    }
    if (depth_mode && (!views[v].depth || !views[v].depth->same_shape(img))) {
      fail(ErrorCode::kShapeMismatch, "depth-supervised training needs a depth image per view");
    }
    for (std::size_t p = 0; p < img.size(); ++p) {
      if (img.data[p] > field.label_count()) {
        fail(ErrorCode::kLabelOutOfRange, "pseudolabel " + std::to_string(img.data[p]) +
                                              " exceeds label count " +
                                              std::to_string(field.label_count()));
      }
      (img.data[p] != 0 ? fg : bg)
          .push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(p)});
    }
  }
  if (fg.empty() && bg.empty()) return {};

  const int batch = train_cfg.rays_per_batch;
  int n_bg = bg.empty() ? 0
                        : static_cast<int>(std::lround(train_cfg.background_fraction * batch));
  if (fg.empty()) n_bg = batch;

  std::vector<LossRecord> trace;
  trace.reserve(train_cfg.iterations);
  std::vector<SupervisedRay> rays(batch);
  std::vector<std::uint64_t> keys;
  std::vector<RayLabelGrad> label_grad;
  std::vector<GradEntry> density_grad;
  const int ch = field.channels();
  for (int it = 0; it < train_cfg.iterations; ++it) {
    CounterRng rng({train_cfg.seed, static_cast<std::uint64_t>(Stream::kTrainRays),
                    static_cast<std::uint64_t>(it)});
    for (int r = 0; r < batch; ++r) {
      const auto& pool = r < batch - n_bg ? fg : bg;
      const PixelRef ref = pool[rng.below(pool.size())];
      const auto& view = views[ref.view];
      const int w = view.pseudolabels.width;
      const Vec2 px(ref.index % w, ref.index / w);
      SupervisedRay& sr = rays[r];
      sr.ray = pixel_ray(px, view.camera.pose, view.camera.intrinsics);
      sr.target = view.pseudolabels.data[ref.index];
      sr.depth_t.reset();
      if (view.depth) {
        const float d = view.depth->data[ref.index];
        if (std::isfinite(d)) {
          sr.depth_t = d / sr.ray.direction.dot(view.camera.pose.rotation.col(2));
        }
      }
    }
    keys.clear();
    if (render_cfg.stratified) {
      for (int r = 0; r < batch; ++r) {
        keys.push_back(stream_key({train_cfg.seed, static_cast<std::uint64_t>(Stream::kTrainJitter),
                                   static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(r)}));
      }
    }

    LossRecord rec;
    rec.iteration = it;
    rec.ce_loss = label_loss_factored(field, rays, render_cfg, &label_grad, keys);
    if (depth_mode) {
      density_grad.clear();
      rec.density_loss =
          density_loss(field, rays, render_cfg, train_cfg.depth_weight, &density_grad, keys);
    }
    // Same per-entry order and arithmetic as applying label_loss's GradEntry list.
    for (const auto& rg : label_grad) {
      for (const auto& n : rg.nodes) {
        float* node = field.logits(n.level).data() + n.node * ch;
        for (int k = 0; k < ch; ++k) {
          node[k] -= static_cast<float>(train_cfg.lr_labels * (n.scale * rg.g[k]));
        }
      }
    }
    if (depth_mode) {
      for (const auto& e : density_grad) {
        float& d = field.density(e.level)[e.index];
        d = std::max(0.0f, d - static_cast<float>(train_cfg.lr_density * e.value));
      }
    }
    trace.push_back(rec);
  }
  return trace;
}

void save_field(const std::string& path, const LabelField& field) {
  std::string buf = "LF01";
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto put64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  for (int a = 0; a < 3; ++a) put64(std::bit_cast<std::uint64_t>(field.bounds().min[a]));
  for (int a = 0; a < 3; ++a) put64(std::bit_cast<std::uint64_t>(field.bounds().max[a]));
  put32(static_cast<std::uint32_t>(field.level_count()));
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    for (int n : field.resolution(l)) put32(static_cast<std::uint32_t>(n));
  }
  put32(field.label_count());
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    for (float v : field.density(l)) put32(std::bit_cast<std::uint32_t>(v));
  }
  for (std::size_t l = 0; l < field.level_count(); ++l) {
    for (float v : field.logits(l)) put32(std::bit_cast<std::uint32_t>(v));
  }
  write_text_file(path, buf);
}

LabelField load_field(const std::string& path) {
  const auto bytes = read_binary_file(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) fail(ErrorCode::kFormatError, path + ": truncated checkpoint");
  };
  auto get32 = [&]() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos + i]} << (8 * i);
    pos += 4;
    return v;
  };
  auto get64 = [&]() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += 8;
    return v;
  };
  need(4);
  if (std::memcmp(bytes.data(), "LF01", 4) != 0) {
    fail(ErrorCode::kFormatError, path + ": bad checkpoint magic");
  }
  pos = 4;
  Aabb bounds;
  for (int a = 0; a < 3; ++a) bounds.min[a] = std::bit_cast<double>(get64());
  for (int a = 0; a < 3; ++a) bounds.max[a] = std::bit_cast<double>(get64());
  const std::uint32_t levels = get32();
  if (levels == 0 || levels > 16) fail(ErrorCode::kFormatError, path + ": bad level count");
  std::vector<Resolution> res(levels);
  for (auto& r : res) {
    for (int& n : r) {
      n = static_cast<int>(get32());
      if (n < 2 || n > 4096) fail(ErrorCode::kFormatError, path + ": bad resolution");
    }
  }
  const std::uint32_t labels = get32();
  if (labels > 65535) fail(ErrorCode::kFormatError, path + ": bad label count");
  LabelField field(bounds, res, labels);
  for (std::size_t l = 0; l < levels; ++l) {
    need(field.density(l).size() * 4);
    for (float& v : field.density(l)) v = std::bit_cast<float>(get32());
  }
  for (std::size_t l = 0; l < levels; ++l) {
    need(field.logits(l).size() * 4);
    for (float& v : field.logits(l)) v = std::bit_cast<float>(get32());
  }
  if (pos != bytes.size()) fail(ErrorCode::kFormatError, path + ": trailing bytes");
  return field;
}

void write_loss_trace(std::ostream& out, const std::vector<LossRecord>& trace) {
  out << "iteration,ce_loss,density_loss\n";
  out.precision(9);
  for (const auto& r : trace) out << r.iteration << ',' << r.ce_loss << ',' << r.density_loss << '\n';
}

}  // namespace masklift
