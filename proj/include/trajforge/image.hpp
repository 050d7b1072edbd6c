#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "trajforge/trajectory.hpp"

namespace trajforge {

// Parameters of the crop -> grayscale -> area-average-resize pipeline that
// turns a raw screen frame into the thumbnail all matching runs on.
struct PreprocessConfig {
  int statusbar_crop_px = 48;  // rows removed from the top, native resolution
  int thumb_width = 64;
  int thumb_height = 128;
};

struct Thumbnail {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major grayscale

  bool operator==(const Thumbnail&) const = default;
};

struct MatchConfig {
  double theta = 0.95;                    // SSIM acceptance threshold
  double hash_prefilter_threshold = 0.80; // below this, skip SSIM entirely
  int hash_size = 8;                      // mean-hash grid side length
  int ssim_window = 8;                    // uniform square window, stride 1
  double c1 = (0.01 * 255) * (0.01 * 255);
  double c2 = (0.03 * 255) * (0.03 * 255);
};

struct BitHash {
  int size = 0;             // grid side length
  std::vector<bool> bits;   // size*size entries, cell mean above grid mean
};

// Result of the equivalence test. ssim is empty when the hash prefilter
// rejected the pair and the SSIM was never computed.
struct SameOutcome {
  bool same = false;
  double hash_similarity = 0.0;
  std::optional<double> ssim;
};

Thumbnail preprocess(const Frame& frame, const PreprocessConfig& cfg);

BitHash mean_hash(const Thumbnail& t, const MatchConfig& cfg);
double hash_similarity(const Thumbnail& a, const Thumbnail& b,
                       const MatchConfig& cfg);

double ssim(const Thumbnail& a, const Thumbnail& b, const MatchConfig& cfg);

SameOutcome same(const Thumbnail& a, const Thumbnail& b,
                 const MatchConfig& cfg);

// Process-wide count of full SSIM evaluations, for verifying that the hash
// prefilter actually short-circuits. Thread-safe.
uint64_t ssim_eval_count();
void reset_ssim_eval_count();

}  // namespace trajforge
