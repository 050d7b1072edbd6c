#include "trajforge/image.hpp"

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace trajforge {

namespace {

std::atomic<uint64_t> g_ssim_evals{0};

// Exact box-filter downsample. Returns per-cell weighted sums with the
// UNIFORM denominator src_w*src_h: output cell (ox,oy) covers the source
// rectangle [ox*w/tw,(ox+1)*w/tw) x [oy*h/th,(oy+1)*h/th), and each source
// pixel contributes value * (x overlap in 1/tw units) * (y overlap in 1/th
// units). Integer arithmetic throughout, so results are identical on every
// platform and the true cell average is sums[i] / (src_w*src_h).
std::vector<int64_t> box_downsample_sums(const std::vector<uint8_t>& src,
                                         int src_w, int src_h, int out_w,
                                         int out_h) {
  // Per-axis overlap weights: weight of source index s in output index o.
  // Nonzero only for s in [o*src/out, (o*src+src-1)/out + ...]; just walk
  // the few source cells each output cell touches.
  std::vector<int64_t> sums(static_cast<size_t>(out_w) * out_h, 0);
  for (int oy = 0; oy < out_h; ++oy) {
    int64_t y_lo = static_cast<int64_t>(oy) * src_h;        // in 1/out_h units
    int64_t y_hi = y_lo + src_h;
    int sy_first = static_cast<int>(y_lo / out_h);
    for (int ox = 0; ox < out_w; ++ox) {
      int64_t x_lo = static_cast<int64_t>(ox) * src_w;      // in 1/out_w units
      int64_t x_hi = x_lo + src_w;
      int sx_first = static_cast<int>(x_lo / out_w);

      int64_t acc = 0;
      for (int sy = sy_first; sy < src_h; ++sy) {
        int64_t py_lo = static_cast<int64_t>(sy) * out_h;
        if (py_lo >= y_hi) break;
        int64_t wy = std::min(py_lo + out_h, y_hi) - std::max(py_lo, y_lo);
        const uint8_t* row = src.data() + static_cast<size_t>(sy) * src_w;
        int64_t row_acc = 0;
        for (int sx = sx_first; sx < src_w; ++sx) {
          int64_t px_lo = static_cast<int64_t>(sx) * out_w;
          if (px_lo >= x_hi) break;
          int64_t wx = std::min(px_lo + out_w, x_hi) - std::max(px_lo, x_lo);
          row_acc += wx * row[sx];
        }
        acc += wy * row_acc;
      }
      sums[static_cast<size_t>(oy) * out_w + ox] = acc;
    }
  }
  return sums;
}

// floor(num/den + 1/2) for non-negative num, positive den.
inline int64_t div_round_half_up(int64_t num, int64_t den) {
  return (2 * num + den) / (2 * den);
}

void require_same_shape(const Thumbnail& a, const Thumbnail& b,
                        const char* op) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument(
        std::string(op) + ": thumbnail dimensions differ (" +
        std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
        std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
}

}  // namespace

Thumbnail preprocess(const Frame& frame, const PreprocessConfig& cfg) {
  if (frame.width <= 0 || frame.height <= 0 || frame.pixels.empty())
    throw std::invalid_argument("preprocess: zero-sized frame");
  if (cfg.statusbar_crop_px < 0)
    throw std::invalid_argument("preprocess: negative crop");
  if (cfg.statusbar_crop_px >= frame.height)
    throw std::invalid_argument(
        "preprocess: crop " + std::to_string(cfg.statusbar_crop_px) +
        " leaves no rows of a " + std::to_string(frame.height) +
        "-row frame");
  if (cfg.thumb_width < 8 || cfg.thumb_height < 8)
    throw std::invalid_argument("preprocess: thumbnail below 8x8");
  if (frame.channels != 1 && frame.channels != 3)
    throw std::invalid_argument("preprocess: unsupported channel count");

  int crop_h = frame.height - cfg.statusbar_crop_px;
  std::vector<uint8_t> gray(static_cast<size_t>(frame.width) * crop_h);
  for (int y = 0; y < crop_h; ++y) {
    const uint8_t* src =
        frame.pixels.data() + static_cast<size_t>(y + cfg.statusbar_crop_px) *
                                  frame.width * frame.channels;
    uint8_t* dst = gray.data() + static_cast<size_t>(y) * frame.width;
    if (frame.channels == 1) {
      std::copy(src, src + frame.width, dst);
    } else {
      for (int x = 0; x < frame.width; ++x) {
        // round(0.299R + 0.587G + 0.114B), half away from zero; exact in
        // integers since the weights sum to 1000/1000.
        int r = src[3 * x], g = src[3 * x + 1], b = src[3 * x + 2];
        dst[x] = static_cast<uint8_t>((299 * r + 587 * g + 114 * b + 500) /
                                      1000);
      }
    }
  }

  Thumbnail t;
  t.width = cfg.thumb_width;
  t.height = cfg.thumb_height;
  std::vector<int64_t> sums = box_downsample_sums(gray, frame.width, crop_h,
                                                  t.width, t.height);
  int64_t den = static_cast<int64_t>(frame.width) * crop_h;
  t.pixels.resize(sums.size());
  for (size_t i = 0; i < sums.size(); ++i)
    t.pixels[i] = static_cast<uint8_t>(div_round_half_up(sums[i], den));
  return t;
}

BitHash mean_hash(const Thumbnail& t, const MatchConfig& cfg) {
  if (cfg.hash_size < 1)
    throw std::invalid_argument("mean_hash: hash_size must be positive");
  if (t.width < cfg.hash_size || t.height < cfg.hash_size)
    throw std::invalid_argument("mean_hash: thumbnail smaller than hash grid");

  int k = cfg.hash_size;
  std::vector<int64_t> sums =
      box_downsample_sums(t.pixels, t.width, t.height, k, k);

  // All cells share the denominator width*height, so "cell mean > grid mean"
  // is exactly  cells * sum_i  >  sum_j sum_j  in int64.
  int64_t total = 0;
  for (int64_t s : sums) total += s;
  int64_t cells = static_cast<int64_t>(k) * k;

  BitHash h;
  h.size = k;
  h.bits.resize(sums.size());
  for (size_t i = 0; i < sums.size(); ++i)
    h.bits[i] = cells * sums[i] > total;
  return h;
}

double hash_similarity(const Thumbnail& a, const Thumbnail& b,
                       const MatchConfig& cfg) {
  require_same_shape(a, b, "hash_similarity");
  BitHash ha = mean_hash(a, cfg);
  BitHash hb = mean_hash(b, cfg);
  size_t agree = 0;
  for (size_t i = 0; i < ha.bits.size(); ++i)
    if (ha.bits[i] == hb.bits[i]) ++agree;
  return static_cast<double>(agree) / static_cast<double>(ha.bits.size());
}

double ssim(const Thumbnail& a, const Thumbnail& b, const MatchConfig& cfg) {
  require_same_shape(a, b, "ssim");
  int win = cfg.ssim_window;
  if (win < 1) throw std::invalid_argument("ssim: window must be positive");
  if (a.width < win || a.height < win)
    throw std::invalid_argument("ssim: thumbnail smaller than the window");

  g_ssim_evals.fetch_add(1, std::memory_order_relaxed);

  int w = a.width, h = a.height;
  size_t iw = static_cast<size_t>(w) + 1;

  // Integral images of x, y, x^2, y^2, xy; (h+1)x(w+1) with a zero border.
  // Window sums are then exact int64 values, so the per-window double math
  // below matches a naive scalar evaluation bit for bit.
  std::vector<int64_t> sx(iw * (h + 1), 0), sy(iw * (h + 1), 0),
      sxx(iw * (h + 1), 0), syy(iw * (h + 1), 0), sxy(iw * (h + 1), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int64_t va = a.pixels[static_cast<size_t>(y) * w + x];
      int64_t vb = b.pixels[static_cast<size_t>(y) * w + x];
      size_t cur = (y + 1) * iw + (x + 1);
      size_t up = y * iw + (x + 1);
      size_t left = cur - 1;
      size_t diag = up - 1;
      sx[cur] = va + sx[up] + sx[left] - sx[diag];
      sy[cur] = vb + sy[up] + sy[left] - sy[diag];
      sxx[cur] = va * va + sxx[up] + sxx[left] - sxx[diag];
      syy[cur] = vb * vb + syy[up] + syy[left] - syy[diag];
      sxy[cur] = va * vb + sxy[up] + sxy[left] - sxy[diag];
    }
  }

  auto rect = [iw](const std::vector<int64_t>& s, int x0, int y0,
                   int x1, int y1) {  // half-open [x0,x1) x [y0,y1)
    return s[static_cast<size_t>(y1) * iw + x1] -
           s[static_cast<size_t>(y0) * iw + x1] -
           s[static_cast<size_t>(y1) * iw + x0] +
           s[static_cast<size_t>(y0) * iw + x0];
  };

  double n = static_cast<double>(win) * win;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + win <= h; ++y0) {
    for (int x0 = 0; x0 + win <= w; ++x0) {
      int x1 = x0 + win, y1 = y0 + win;
      double wsx = static_cast<double>(rect(sx, x0, y0, x1, y1));
      double wsy = static_cast<double>(rect(sy, x0, y0, x1, y1));
      double wsxx = static_cast<double>(rect(sxx, x0, y0, x1, y1));
      double wsyy = static_cast<double>(rect(syy, x0, y0, x1, y1));
      double wsxy = static_cast<double>(rect(sxy, x0, y0, x1, y1));

      double mx = wsx / n;
      double my = wsy / n;
      double vx = wsxx / n - mx * mx;  // population variance
      double vy = wsyy / n - my * my;
      double cov = wsxy / n - mx * my;

      double num = (2.0 * mx * my + cfg.c1) * (2.0 * cov + cfg.c2);
      double den = (mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

SameOutcome same(const Thumbnail& a, const Thumbnail& b,
                 const MatchConfig& cfg) {
  require_same_shape(a, b, "same");
  SameOutcome out;
  out.hash_similarity = hash_similarity(a, b, cfg);
  if (out.hash_similarity < cfg.hash_prefilter_threshold) {
    out.same = false;  // SSIM deliberately not evaluated
    return out;
  }
  out.ssim = ssim(a, b, cfg);
  out.same = *out.ssim >= cfg.theta;
  return out;
}

uint64_t ssim_eval_count() {
  return g_ssim_evals.load(std::memory_order_relaxed);
}

void reset_ssim_eval_count() {
  g_ssim_evals.store(0, std::memory_order_relaxed);
}

}  // namespace trajforge
