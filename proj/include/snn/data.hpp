#pragma once

// Event streams, frame binning, augmentation and the desk-scale synthetic sets.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snn/rng.hpp"
#include "snn/tensor.hpp"

namespace snn::data {

struct Event {
  std::uint64_t t_us = 0;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint8_t polarity = 0;

  bool operator==(const Event&) const = default;
};

struct EventStream {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Event> events;

  // Throws std::invalid_argument on out-of-range coordinates or polarity.
  void validate() const;
};

// Text format: a header line "H W", then one "t x y p" line per event.
// Events are sorted by timestamp (stable) after loading.
EventStream parse_events(const std::string& text);
std::string format_events(const EventStream& s);
EventStream load_events(const std::string& path);
void save_events(const std::string& path, const EventStream& s);

// Splits [t_first, t_last] into T equal windows and counts events per window,
// polarity and pixel. Result [T,2,H,W]; an empty stream gives all zeros.
Tensor bin_events(const EventStream& s, std::size_t timesteps, DType dt = DType::f64);

struct FrameSequence {
  Tensor frames;  // [T,C,H,W]; static images use T = 1
  std::size_t label = 0;
};

// ---- spatial transforms on the trailing [H,W] dims of any tensor ----

Tensor hflip(const Tensor& img);
Tensor translate(const Tensor& img, long dy, long dx);
// Pads by `pad` zeros on every side and crops back at offset (oy, ox), 0 <= o <= 2*pad.
Tensor pad_crop(const Tensor& img, std::size_t pad, std::size_t oy, std::size_t ox);
// Nearest-neighbour rotation about the centre, zero fill.
Tensor rotate(const Tensor& img, double degrees);
// Zeroes the k x k square with top-left (y0, x0), clipped to the image.
Tensor cutout(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t k);
Tensor erase(const Tensor& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
// Per-channel contrast about the channel mean; img is [C,H,W].
Tensor adjust_contrast(const Tensor& img, double factor);

struct AugmentPolicy {
  std::vector<std::string> ops;  // subset of crop, hflip, cutout, contrast, rotate, translate
  std::size_t crop_pad = 4;
  std::size_t cutout_size = 8;
  double max_rotate_deg = 15.0;
  long max_translate = 4;
  double contrast_low = 0.5;
  double contrast_high = 1.5;
};

// Throws std::invalid_argument on unknown names.
AugmentPolicy make_policy(const std::vector<std::string>& ops);

// crop -> hflip (p = 0.5) -> two of {contrast, rotate, translate} drawn
// without replacement from those enabled -> cutout (interior placement).
Tensor augment_static(const Tensor& img, Rng& rng, const AugmentPolicy& policy);

enum class EventAugKind { kIdentity, kCrop, kTranslate, kRotate, kCutout, kErase };

struct EventAug {
  bool flip = false;
  EventAugKind kind = EventAugKind::kIdentity;
  long a = 0, b = 0;        // offsets / top-left corner
  std::size_t size_h = 0, size_w = 0;
  double degrees = 0;
};

// Same spatial transform for every timestep of frames [T,C,H,W].
Tensor apply_event_aug(const Tensor& frames, const EventAug& aug);
EventAug sample_event_aug(Rng& rng, std::size_t height, std::size_t width);
Tensor augment_event_frames(const Tensor& frames, Rng& rng);

struct MixedSample {
  Tensor frames;
  std::vector<double> soft_label;
};

MixedSample mixup(const FrameSequence& a, const FrameSequence& b, double lambda, std::size_t num_classes);

// ---- datasets ----

enum class SynthKind { kMovingBar, kTextures, kParityBlobs };

SynthKind parse_synth_kind(const std::string& name);
std::string synth_kind_name(SynthKind kind);

struct Sample {
  Tensor frames;  // [T,C,H,W]
  std::size_t label = 0;
  std::optional<EventStream> events;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t timesteps = 1;  // frames per sample; 1 for static images

  std::size_t size() const { return samples.size(); }
};

struct SynthOptions {
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t timesteps = 4;
  std::size_t noise_events = 8;
};

// Moving bars come in time-reversed pairs (a rightward sample followed by
// the same frames in reverse order, labelled leftward), so the two classes
// share every individual frame and differ only in temporal order.
Dataset synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed, const SynthOptions& opt = {});

// Manifest: JSON array of {"path": ..., "label": ...}. Paths ending in
// ".events" or ".txt" are event streams; anything else is an archive holding
// "image" [C,H,W] or "frames" [T,C,H,W]. Relative paths resolve against the
// manifest's directory.
Dataset load_manifest(const std::string& path, std::size_t timesteps, std::size_t num_classes = 0);
void write_manifest(const std::string& dir, const Dataset& ds, const std::string& stem);

// Stacks per-sample [T,C,H,W] tensors into T batch tensors [N,C,H,W].
std::vector<Tensor> stack_samples(const std::vector<Tensor>& frames, DType dt);
std::vector<Tensor> make_batch(const Dataset& ds, const std::vector<std::size_t>& indices, DType dt);

}  // namespace snn::data
