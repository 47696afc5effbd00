#include "snn/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "snn/archive.hpp"
#include "snn/io_util.hpp"
#include "snn/ops.hpp"

namespace snn::data {

// ---- event streams ----

void EventStream::validate() const {
  if (height == 0 || width == 0) throw std::invalid_argument("event stream sensor size must be positive");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.x >= width || e.y >= height) {
      throw std::invalid_argument("event " + std::to_string(i) + " at (" + std::to_string(e.x) + "," +
                                  std::to_string(e.y) + ") lies outside the " + std::to_string(height) + "x" +
                                  std::to_string(width) + " sensor");
    }
    if (e.polarity > 1) throw std::invalid_argument("event " + std::to_string(i) + " has polarity > 1");
  }
}

EventStream parse_events(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  EventStream s;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream fields(t);
    if (!have_header) {
      long long h = 0, w = 0;
      if (!(fields >> h >> w) || h <= 0 || w <= 0 || !(fields >> std::ws).eof()) {
        throw std::invalid_argument("event file line " + std::to_string(line_no) + ": expected header 'H W'");
      }
      s.height = static_cast<std::size_t>(h);
      s.width = static_cast<std::size_t>(w);
      have_header = true;
      continue;
    }
    long long ts = 0, x = 0, y = 0, p = 0;
    if (!(fields >> ts >> x >> y >> p) || !(fields >> std::ws).eof() || ts < 0 || x < 0 || y < 0 || p < 0 ||
        p > 1) {
      throw std::invalid_argument("event file line " + std::to_string(line_no) + ": expected 't x y p' with p in {0,1}");
    }
    s.events.push_back({static_cast<std::uint64_t>(ts), static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y),
                        static_cast<std::uint8_t>(p)});
  }
  if (!have_header) throw std::invalid_argument("event file is missing the 'H W' header");
  std::stable_sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
  s.validate();
  return s;
}

std::string format_events(const EventStream& s) {
  std::string out = std::to_string(s.height) + " " + std::to_string(s.width) + "\n";
  for (const auto& e : s.events) {
    out += std::to_string(e.t_us) + " " + std::to_string(e.x) + " " + std::to_string(e.y) + " " +
           std::to_string(static_cast<int>(e.polarity)) + "\n";
  }
  return out;
}

EventStream load_events(const std::string& path) {
  try {
    return parse_events(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void save_events(const std::string& path, const EventStream& s) { write_file(path, format_events(s)); }

Tensor bin_events(const EventStream& s, std::size_t timesteps, DType dt) {
  if (timesteps == 0) throw std::invalid_argument("bin_events: T must be >= 1");
  s.validate();
  const std::size_t H = s.height, W = s.width;
  std::vector<double> counts(timesteps * 2 * H * W, 0.0);
  if (!s.events.empty()) {
    std::uint64_t t0 = s.events.front().t_us, t1 = t0;
    for (const auto& e : s.events) {
      t0 = std::min(t0, e.t_us);
      t1 = std::max(t1, e.t_us);
    }
    const std::uint64_t span = t1 - t0;
    for (const auto& e : s.events) {
      std::size_t w = 0;
      if (span > 0) {
        const std::uint64_t d = e.t_us - t0;
        std::uint64_t scaled = 0;
        if (d <= std::numeric_limits<std::uint64_t>::max() / timesteps) {
          scaled = d * timesteps / span;
        } else {
          scaled = static_cast<std::uint64_t>(static_cast<long double>(d) * timesteps / span);
        }
        w = static_cast<std::size_t>(std::min<std::uint64_t>(scaled, timesteps - 1));
      }
      counts[((w * 2 + e.polarity) * H + e.y) * W + e.x] += 1.0;
    }
  }
  return Tensor::from({timesteps, 2, H, W}, counts, dt);
}

// ---- spatial transforms ----

namespace {

using SourceFn = std::function<bool(long y, long x, long& sy, long& sx)>;

void require_spatial(const char* op, const Tensor& img) {
  if (img.dim() < 2 || img.numel() == 0) throw ShapeError(std::string(op) + ": expected [...,H,W], got " + to_string(img.shape()));
}

// out(y, x) = in(sy, sx) when the source lies inside the image, else 0.
Tensor remap(const Tensor& img, const SourceFn& source) {
  const std::size_t H = img.size(img.dim() - 2), W = img.size(img.dim() - 1);
  const std::size_t planes = img.numel() / (H * W);
  return dispatch(img.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = img.data<T>();
    std::vector<T> out(in.size(), T(0));
    for (std::size_t yy = 0; yy < H; ++yy) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        long sy = 0, sx = 0;
        if (!source(static_cast<long>(yy), static_cast<long>(xx), sy, sx)) continue;
        if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) continue;
        const std::size_t src = static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx);
        for (std::size_t p = 0; p < planes; ++p) out[p * H * W + yy * W + xx] = in[p * H * W + src];
      }
    }
    return Tensor::from_buffer(img.shape(), Buffer(std::move(out)));
  });
}

Tensor zero_rect(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const std::size_t H = img.size(img.dim() - 2), W = img.size(img.dim() - 1);
  const std::size_t planes = img.numel() / (H * W);
  return dispatch(img.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = img.data<T>();
    std::vector<T> out(in.begin(), in.end());
    const std::size_t y1 = std::min(H, y0 + h), x1 = std::min(W, x0 + w);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) out[p * H * W + y * W + x] = T(0);
      }
    }
    return Tensor::from_buffer(img.shape(), Buffer(std::move(out)));
  });
}

}  // namespace

Tensor hflip(const Tensor& img) {
  require_spatial("hflip", img);
  const long W = static_cast<long>(img.size(img.dim() - 1));
  return remap(img, [W](long y, long x, long& sy, long& sx) {
    sy = y;
    sx = W - 1 - x;
    return true;
  });
}

Tensor translate(const Tensor& img, long dy, long dx) {
  require_spatial("translate", img);
  return remap(img, [dy, dx](long y, long x, long& sy, long& sx) {
    sy = y - dy;
    sx = x - dx;
    return true;
  });
}

Tensor pad_crop(const Tensor& img, std::size_t pad, std::size_t oy, std::size_t ox) {
  require_spatial("pad_crop", img);
  if (oy > 2 * pad || ox > 2 * pad) throw std::invalid_argument("pad_crop: crop offset exceeds 2*pad");
  return translate(img, static_cast<long>(pad) - static_cast<long>(oy), static_cast<long>(pad) - static_cast<long>(ox));
}

Tensor rotate(const Tensor& img, double degrees) {
  require_spatial("rotate", img);
  const double cy = (static_cast<double>(img.size(img.dim() - 2)) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.size(img.dim() - 1)) - 1.0) / 2.0;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  return remap(img, [=](long y, long x, long& sy, long& sx) {
    const double ry = static_cast<double>(y) - cy, rx = static_cast<double>(x) - cx;
    // inverse rotation of the output coordinate
    sy = std::lround(cy + c * ry - s * rx);
    sx = std::lround(cx + s * ry + c * rx);
    return true;
  });
}

Tensor cutout(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t k) {
  require_spatial("cutout", img);
  return zero_rect(img, y0, x0, k, k);
}

Tensor erase(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  require_spatial("erase", img);
  return zero_rect(img, y0, x0, h, w);
}

Tensor adjust_contrast(const Tensor& img, double factor) {
  require_spatial("adjust_contrast", img);
  const std::size_t hw = img.size(img.dim() - 2) * img.size(img.dim() - 1);
  const std::size_t planes = img.numel() / hw;
  return dispatch(img.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto in = img.data<T>();
    std::vector<T> out(in.size());
    for (std::size_t p = 0; p < planes; ++p) {
      double mean = 0;
      for (std::size_t i = 0; i < hw; ++i) mean += in[p * hw + i];
      mean /= static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = static_cast<T>(mean + factor * (in[p * hw + i] - mean));
    }
    return Tensor::from_buffer(img.shape(), Buffer(std::move(out)));
  });
}

namespace {
const std::vector<std::string> kPolicyOps{"crop", "hflip", "cutout", "contrast", "rotate", "translate"};

bool has_op(const AugmentPolicy& p, const std::string& op) {
  return std::find(p.ops.begin(), p.ops.end(), op) != p.ops.end();
}

long uniform_int(Rng& rng, long lo, long hi) { return lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }
}  // namespace

AugmentPolicy make_policy(const std::vector<std::string>& ops) {
  for (const auto& op : ops) {
    if (std::find(kPolicyOps.begin(), kPolicyOps.end(), op) == kPolicyOps.end()) {
      throw std::invalid_argument("unknown augmentation '" + op +
                                  "' (expected crop, hflip, cutout, contrast, rotate or translate)");
    }
  }
  AugmentPolicy p;
  p.ops = ops;
  return p;
}

Tensor augment_static(const Tensor& img, Rng& rng, const AugmentPolicy& policy) {
  if (img.dim() != 3) throw ShapeError("augment_static: expected [C,H,W], got " + to_string(img.shape()));
  make_policy(policy.ops);
  const std::size_t H = img.size(1), W = img.size(2);
  Tensor out = img;
  if (has_op(policy, "crop")) {
    const auto oy = rng.below(2 * policy.crop_pad + 1), ox = rng.below(2 * policy.crop_pad + 1);
    out = pad_crop(out, policy.crop_pad, oy, ox);
  }
  if (has_op(policy, "hflip") && rng.bernoulli(0.5)) out = hflip(out);

  std::vector<std::string> pool;
  for (const char* op : {"contrast", "rotate", "translate"}) {
    if (has_op(policy, op)) pool.emplace_back(op);
  }
  const std::size_t picks = std::min<std::size_t>(2, pool.size());
  for (std::size_t i = 0; i < picks; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    const auto& op = pool[i];
    if (op == "contrast") {
      out = adjust_contrast(out, rng.uniform(policy.contrast_low, policy.contrast_high));
    } else if (op == "rotate") {
      out = rotate(out, rng.uniform(-policy.max_rotate_deg, policy.max_rotate_deg));
    } else {
      const long dy = uniform_int(rng, -policy.max_translate, policy.max_translate);
      const long dx = uniform_int(rng, -policy.max_translate, policy.max_translate);
      out = translate(out, dy, dx);
    }
  }

  if (has_op(policy, "cutout")) {
    const std::size_t k = std::min({policy.cutout_size, H, W});
    const auto y0 = rng.below(H - k + 1), x0 = rng.below(W - k + 1);
    out = cutout(out, y0, x0, k);
  }
  return out;
}

Tensor apply_event_aug(const Tensor& frames, const EventAug& aug) {
  Tensor out = aug.flip ? hflip(frames) : frames;
  switch (aug.kind) {
    case EventAugKind::kIdentity:
      return out;
    case EventAugKind::kCrop:
      return pad_crop(out, aug.size_h, static_cast<std::size_t>(aug.a), static_cast<std::size_t>(aug.b));
    case EventAugKind::kTranslate:
      return translate(out, aug.a, aug.b);
    case EventAugKind::kRotate:
      return rotate(out, aug.degrees);
    case EventAugKind::kCutout:
      return cutout(out, static_cast<std::size_t>(aug.a), static_cast<std::size_t>(aug.b), aug.size_h);
    case EventAugKind::kErase:
      return erase(out, static_cast<std::size_t>(aug.a), static_cast<std::size_t>(aug.b), aug.size_h, aug.size_w);
  }
  return out;
}

EventAug sample_event_aug(Rng& rng, std::size_t height, std::size_t width) {
  EventAug aug;
  aug.flip = rng.bernoulli(0.5);
  const long H = static_cast<long>(height), W = static_cast<long>(width);
  switch (rng.below(5)) {
    case 0: {
      aug.kind = EventAugKind::kCrop;
      aug.size_h = static_cast<std::size_t>(std::max(1L, std::min(H, W) / 8));
      const long span = 2 * static_cast<long>(aug.size_h);
      aug.a = uniform_int(rng, 0, span);
      aug.b = uniform_int(rng, 0, span);
      break;
    }
    case 1: {
      aug.kind = EventAugKind::kTranslate;
      const long m = std::max(1L, std::min(H, W) / 8);
      aug.a = uniform_int(rng, -m, m);
      aug.b = uniform_int(rng, -m, m);
      break;
    }
    case 2:
      aug.kind = EventAugKind::kRotate;
      aug.degrees = rng.uniform(-15.0, 15.0);
      break;
    case 3: {
      aug.kind = EventAugKind::kCutout;
      aug.size_h = aug.size_w = static_cast<std::size_t>(std::max(1L, std::min(H, W) / 4));
      aug.a = uniform_int(rng, 0, H - static_cast<long>(aug.size_h));
      aug.b = uniform_int(rng, 0, W - static_cast<long>(aug.size_w));
      break;
    }
    default: {
      aug.kind = EventAugKind::kErase;
      aug.size_h = static_cast<std::size_t>(uniform_int(rng, 1, std::max(1L, H / 2)));
      aug.size_w = static_cast<std::size_t>(uniform_int(rng, 1, std::max(1L, W / 2)));
      aug.a = uniform_int(rng, 0, H - static_cast<long>(aug.size_h));
      aug.b = uniform_int(rng, 0, W - static_cast<long>(aug.size_w));
      break;
    }
  }
  return aug;
}

Tensor augment_event_frames(const Tensor& frames, Rng& rng) {
  if (frames.dim() != 4) throw ShapeError("augment_event_frames: expected [T,C,H,W], got " + to_string(frames.shape()));
  return apply_event_aug(frames, sample_event_aug(rng, frames.size(2), frames.size(3)));
}

MixedSample mixup(const FrameSequence& a, const FrameSequence& b, double lambda, std::size_t num_classes) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda must be in [0,1]");
  if (a.frames.shape() != b.frames.shape() || a.frames.dtype() != b.frames.dtype()) {
    throw ShapeError("mixup: shapes " + to_string(a.frames.shape()) + " and " + to_string(b.frames.shape()) +
                     " differ");
  }
  if (a.label >= num_classes || b.label >= num_classes) throw std::invalid_argument("mixup: label out of range");
  MixedSample out;
  out.frames = dispatch(a.frames.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto x = a.frames.data<T>();
    auto y = b.frames.data<T>();
    const T la = static_cast<T>(lambda), lb = static_cast<T>(1.0 - lambda);
    std::vector<T> v(x.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = la * x[i] + lb * y[i];
    return Tensor::from_buffer(a.frames.shape(), Buffer(std::move(v)));
  });
  out.soft_label.assign(num_classes, 0.0);
  out.soft_label[a.label] += lambda;
  out.soft_label[b.label] += 1.0 - lambda;
  return out;
}

// ---- synthetic datasets ----

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "moving-bar") return SynthKind::kMovingBar;
  if (name == "textures") return SynthKind::kTextures;
  if (name == "parity-blobs") return SynthKind::kParityBlobs;
  throw std::invalid_argument("unknown synthetic dataset '" + name + "' (expected moving-bar, textures or parity-blobs)");
}

std::string synth_kind_name(SynthKind kind) {
  switch (kind) {
    case SynthKind::kMovingBar: return "moving-bar";
    case SynthKind::kTextures: return "textures";
    case SynthKind::kParityBlobs: return "parity-blobs";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kStepUs = 1000;

// Events of one moving-bar trajectory, grouped per step.
std::vector<std::vector<Event>> bar_steps(Rng& rng, const SynthOptions& opt) {
  const std::size_t H = opt.height, W = opt.width;
  const std::size_t len = std::max<std::size_t>(1, H / 2);
  const std::size_t x0 = rng.below(W);
  const std::size_t y0 = rng.below(H - len + 1);
  const auto polarity = static_cast<std::uint8_t>(rng.below(2));
  std::vector<std::vector<Event>> steps(opt.timesteps);
  auto offset = [&] { return static_cast<std::uint64_t>(kStepUs * 4 / 10 + rng.below(kStepUs * 2 / 10 + 1)); };
  for (std::size_t k = 0; k < opt.timesteps; ++k) {
    const auto x = static_cast<std::uint32_t>((x0 + k) % W);
    for (std::size_t y = y0; y < y0 + len; ++y) steps[k].push_back({offset(), x, static_cast<std::uint32_t>(y), polarity});
    for (std::size_t i = 0; i < opt.noise_events; ++i) {
      steps[k].push_back({offset(), static_cast<std::uint32_t>(rng.below(W)), static_cast<std::uint32_t>(rng.below(H)),
                          static_cast<std::uint8_t>(rng.below(2))});
    }
  }
  return steps;
}

EventStream assemble(const std::vector<std::vector<Event>>& steps, bool reversed, const SynthOptions& opt) {
  EventStream s;
  s.height = opt.height;
  s.width = opt.width;
  const std::size_t T = steps.size();
  for (std::size_t k = 0; k < T; ++k) {
    const auto& src = steps[reversed ? T - 1 - k : k];
    for (auto e : src) {
      e.t_us += k * kStepUs;
      s.events.push_back(e);
    }
  }
  std::stable_sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t_us < b.t_us; });
  return s;
}

Tensor texture(Rng& rng, std::size_t label, const SynthOptions& opt) {
  const std::size_t H = opt.height, W = opt.width;
  const double period = 2.0 + static_cast<double>(rng.below(3));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> colour(3);
  for (auto& c : colour) c = rng.uniform(0.5, 1.0);
  std::vector<double> v(3 * H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double coord = static_cast<double>(label == 0 ? y : x);
      const double base = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * coord / period + phase);
      for (std::size_t c = 0; c < 3; ++c) v[(c * H + y) * W + x] = colour[c] * base + 0.1 * rng.normal();
    }
  }
  return Tensor::from({1, 3, H, W}, v);
}

Tensor blobs(Rng& rng, std::size_t count, const SynthOptions& opt) {
  const std::size_t H = opt.height, W = opt.width;
  const std::size_t gh = std::max<std::size_t>(1, H / 2), gw = std::max<std::size_t>(1, W / 2);
  std::vector<std::size_t> cells(gh * gw);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  count = std::min(count, cells.size());
  std::vector<double> v(3 * H * W, 0.0);
  for (std::size_t b = 0; b < count; ++b) {
    std::swap(cells[b], cells[b + rng.below(cells.size() - b)]);
    const std::size_t cy = (cells[b] / gw) * 2, cx = (cells[b] % gw) * 2;
    std::vector<double> colour(3);
    for (auto& c : colour) c = rng.uniform(0.3, 1.0);
    for (std::size_t y = cy; y < std::min(H, cy + 2); ++y) {
      for (std::size_t x = cx; x < std::min(W, cx + 2); ++x) {
        for (std::size_t c = 0; c < 3; ++c) v[(c * H + y) * W + x] = colour[c];
      }
    }
  }
  return Tensor::from({1, 3, H, W}, v);
}

}  // namespace

Dataset synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed, const SynthOptions& opt) {
  if (opt.height < 2 || opt.width < 2 || opt.timesteps == 0) throw std::invalid_argument("synth_dataset: bad sensor options");
  Rng rng(hash_key({0x73796e74ULL, static_cast<std::uint64_t>(kind), seed}));
  Dataset ds;
  ds.num_classes = 2;
  ds.height = opt.height;
  ds.width = opt.width;
  if (kind == SynthKind::kMovingBar) {
    ds.channels = 2;
    ds.timesteps = opt.timesteps;
    while (ds.samples.size() < n) {
      const auto steps = bar_steps(rng, opt);
      for (bool reversed : {false, true}) {
        if (ds.samples.size() == n) break;
        auto events = assemble(steps, reversed, opt);
        ds.samples.push_back({bin_events(events, opt.timesteps), reversed ? 1u : 0u, std::move(events)});
      }
    }
    return ds;
  }
  ds.channels = 3;
  ds.timesteps = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    if (kind == SynthKind::kTextures) {
      ds.samples.push_back({texture(rng, label, opt), label, std::nullopt});
    } else {
      // 1..4 blobs, label is the parity of the count
      const std::size_t count = 1 + 2 * rng.below(2) + (label == 0 ? 1 : 0);
      ds.samples.push_back({blobs(rng, count, opt), label, std::nullopt});
    }
  }
  return ds;
}

namespace {
bool is_event_path(const std::string& p) {
  const auto ext = std::filesystem::path(p).extension().string();
  return ext == ".events" || ext == ".txt";
}
}  // namespace

Dataset load_manifest(const std::string& path, std::size_t timesteps, std::size_t num_classes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  if (!j.is_array() || j.empty()) throw std::invalid_argument(path + ": manifest must be a non-empty JSON array");
  const auto base = std::filesystem::path(path).parent_path();
  Dataset ds;
  std::size_t max_label = 0;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("path") || !item.contains("label") || !item["path"].is_string() ||
        !item["label"].is_number_unsigned()) {
      throw std::invalid_argument(path + ": every entry needs a string 'path' and a non-negative integer 'label'");
    }
    auto p = std::filesystem::path(item["path"].get<std::string>());
    if (p.is_relative()) p = base / p;
    Sample s;
    s.label = item["label"].get<std::size_t>();
    if (is_event_path(p.string())) {
      s.events = load_events(p.string());
      s.frames = bin_events(*s.events, timesteps);
    } else {
      const auto a = Archive::load(p.string());
      if (a.contains("frames")) {
        s.frames = a.get("frames").to(DType::f64);
      } else {
        const Tensor& img = a.get("image");
        if (img.dim() != 3) throw ShapeError(p.string() + ": 'image' must be [C,H,W]");
        s.frames = reshape(img.to(DType::f64), {1, img.size(0), img.size(1), img.size(2)});
      }
      if (s.frames.dim() != 4) throw ShapeError(p.string() + ": 'frames' must be [T,C,H,W]");
    }
    if (ds.samples.empty()) {
      ds.timesteps = s.frames.size(0);
      ds.channels = s.frames.size(1);
      ds.height = s.frames.size(2);
      ds.width = s.frames.size(3);
    } else if (s.frames.shape() != ds.samples.front().frames.shape()) {
      throw ShapeError(p.string() + ": shape " + to_string(s.frames.shape()) + " differs from " +
                       to_string(ds.samples.front().frames.shape()));
    }
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = num_classes == 0 ? std::max<std::size_t>(2, max_label + 1) : num_classes;
  if (max_label >= ds.num_classes) throw std::invalid_argument(path + ": label " + std::to_string(max_label) + " out of range");
  return ds;
}

void write_manifest(const std::string& dir, const Dataset& ds, const std::string& stem) {
  std::filesystem::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    std::string name;
    if (s.events) {
      name = stem + "_" + std::to_string(i) + ".events";
      save_events((std::filesystem::path(dir) / name).string(), *s.events);
    } else {
      name = stem + "_" + std::to_string(i) + ".arr";
      Archive a;
      if (s.frames.size(0) == 1) {
        a.put("image", reshape(s.frames, {s.frames.size(1), s.frames.size(2), s.frames.size(3)}));
      } else {
        a.put("frames", s.frames);
      }
      a.save((std::filesystem::path(dir) / name).string());
    }
    list.push_back({{"path", name}, {"label", s.label}});
  }
  write_file((std::filesystem::path(dir) / (stem + ".json")).string(), list.dump(1) + "\n");
}

std::vector<Tensor> stack_samples(const std::vector<Tensor>& frames, DType dt) {
  if (frames.empty()) throw std::invalid_argument("stack_samples: no samples");
  const Shape& s0 = frames.front().shape();
  if (s0.size() != 4) throw ShapeError("stack_samples: expected [T,C,H,W], got " + to_string(s0));
  const std::size_t T = s0[0], per = s0[1] * s0[2] * s0[3], n = frames.size();
  std::vector<Tensor> out;
  dispatch(dt, [&](auto tag) {
    using T_ = decltype(tag);
    std::vector<std::vector<T_>> bufs(T, std::vector<T_>(n * per));
    for (std::size_t i = 0; i < n; ++i) {
      if (frames[i].shape() != s0) throw ShapeError("stack_samples: sample shapes differ");
      const Tensor f = frames[i].dtype() == dt ? frames[i] : frames[i].to(dt);
      auto d = f.data<T_>();
      for (std::size_t t = 0; t < T; ++t) std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(t * per), per, bufs[t].begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    for (auto& b : bufs) out.push_back(Tensor::from_buffer({n, s0[1], s0[2], s0[3]}, Buffer(std::move(b))));
  });
  return out;
}

std::vector<Tensor> make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, DType dt) {
  std::vector<Tensor> frames;
  for (auto i : indices) frames.push_back(ds.samples.at(i).frames);
  return stack_samples(frames, dt);
}

}  // namespace snn::data
