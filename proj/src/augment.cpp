#include "lymebench/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace lymebench {

namespace {

inline uint8_t clamp_u8(double v) { return uint8_t(std::clamp(v + 0.5, 0.0, 255.0)); }

// reflect with edge duplication: ... 2 1 0 | 0 1 2 ... n-1 | n-1 ...
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i = ((i % period) + period) % period;
  return i < n ? i : period - 1 - i;
}

inline double sample_bilinear_reflect(const Image& img, double fy, double fx, int c) {
  int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
  double wy = fy - y0, wx = fx - x0;
  int ya = reflect_index(y0, img.height), yb = reflect_index(y0 + 1, img.height);
  int xa = reflect_index(x0, img.width), xb = reflect_index(x0 + 1, img.width);
  return (1 - wy) * ((1 - wx) * img.at(ya, xa, c) + wx * img.at(ya, xb, c)) +
         wy * ((1 - wx) * img.at(yb, xa, c) + wx * img.at(yb, xb, c));
}

inline double luma(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

}  // namespace

const char* aug_kind_name(AugKind k) {
  switch (k) {
    case AugKind::FlipLrOrUd: return "flip";
    case AugKind::SmallRotation: return "small_rotation";
    case AugKind::RightAngleRotation: return "right_angle_rotation";
    case AugKind::Brightness: return "brightness";
    case AugKind::Contrast: return "contrast";
    case AugKind::Saturation: return "saturation";
    case AugKind::PerspectiveSkew: return "perspective_skew";
  }
  return "?";
}

void AugmentationSpec::validate() const {
  if (expansion_factor < 1) fail("augmentation spec: expansion_factor must be >= 1");
  for (const auto& op : ops) {
    if (op.probability < 0.0 || op.probability > 1.0)
      fail("augmentation spec: probability out of [0,1]");
    switch (op.kind) {
      case AugKind::Brightness:
      case AugKind::Contrast:
      case AugKind::Saturation:
        if (!(op.min_f > 0.0 && op.min_f <= op.max_f))
          fail("augmentation spec: factor range must satisfy 0 < min <= max");
        break;
      case AugKind::SmallRotation:
        if (op.max_deg <= 0.0) fail("augmentation spec: max rotation must be positive");
        break;
      case AugKind::PerspectiveSkew:
        if (op.magnitude <= 0.0) fail("augmentation spec: skew magnitude must be positive");
        break;
      default:
        break;
    }
  }
}

AugmentationSpec standard_augmentation_spec() {
  AugmentationSpec spec;
  spec.expansion_factor = 20;
  spec.ops = {
      {.kind = AugKind::FlipLrOrUd, .probability = 0.5},
      {.kind = AugKind::SmallRotation, .probability = 0.5, .max_deg = 5.0},
      {.kind = AugKind::RightAngleRotation, .probability = 0.5},
      {.kind = AugKind::Brightness, .probability = 0.5, .min_f = 0.7, .max_f = 1.3},
      {.kind = AugKind::Contrast, .probability = 0.5, .min_f = 0.7, .max_f = 1.3},
      {.kind = AugKind::Saturation, .probability = 0.5, .min_f = 0.7, .max_f = 1.3},
      {.kind = AugKind::PerspectiveSkew, .probability = 0.5, .magnitude = 0.10},
  };
  return spec;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image rotate_right_angle(const Image& img, int degrees) {
  if (degrees == 180) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) = img.at(img.height - 1 - y, img.width - 1 - x, c);
    return out;
  }
  if (degrees == 90 || degrees == 270) {
    Image out(img.height, img.width);  // canvas transposes
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        // 90: counter-clockwise source -> (x, H_out-1-y) in original coordinates
        int sy = degrees == 90 ? x : out.width - 1 - x;
        int sx = degrees == 90 ? out.height - 1 - y : y;
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
    return out;
  }
  fail("rotate_right_angle: degrees must be 90, 180 or 270");
}

Image rotate_small(const Image& img, double degrees) {
  const double rad = degrees * M_PI / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // inverse mapping: rotate output coords by -angle around the center
      double dy = y - cy, dx = x - cx;
      double sy = cy + (sn * dx + cs * dy);
      double sx = cx + (cs * dx - sn * dy);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp_u8(sample_bilinear_reflect(img, sy, sx, c));
    }
  }
  return out;
}

Image adjust_brightness(const Image& img, double factor) {
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.px.size(); ++i) out.px[i] = clamp_u8(img.px[i] * factor);
  return out;
}

Image adjust_contrast(const Image& img, double factor) {
  double mean = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) mean += luma(img, y, x);
  mean /= double(img.width) * img.height;
  Image out(img.width, img.height);
  for (size_t i = 0; i < img.px.size(); ++i)
    out.px[i] = clamp_u8(mean + factor * (img.px[i] - mean));
  return out;
}

Image adjust_saturation(const Image& img, double factor) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double g = luma(img, y, x);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp_u8(g + factor * (img.at(y, x, c) - g));
    }
  }
  return out;
}

namespace {

// Solve the 8x8 system mapping output quad corners to source corners,
// giving the output->source homography used for inverse sampling.
std::array<double, 9> homography_from_corners(const std::array<std::pair<double, double>, 4>& dst,
                                              const std::array<std::pair<double, double>, 4>& src) {
  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    double X = dst[i].first, Y = dst[i].second;   // output coords
    double x = src[i].first, y = src[i].second;   // source coords
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = X; r0[1] = Y; r0[2] = 1; r0[6] = -X * x; r0[7] = -Y * x; r0[8] = x;
    r1[3] = X; r1[4] = Y; r1[5] = 1; r1[6] = -X * y; r1[7] = -Y * y; r1[8] = y;
  }
  // Gaussian elimination with partial pivoting
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    if (std::abs(a[col][col]) < 1e-12) fail("perspective_skew: degenerate corner layout");
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::array<double, 9> h;
  for (int i = 0; i < 8; ++i) h[size_t(i)] = a[i][8] / a[i][i];
  h[8] = 1.0;
  return h;
}

}  // namespace

Image perspective_skew(const Image& img,
                       const std::array<std::pair<double, double>, 4>& corner_shift) {
  const double w = img.width - 1.0, h = img.height - 1.0;
  // source corners TL TR BR BL stay fixed; output corners move by the shifts,
  // i.e. the output quad is sampled back from the full source frame
  std::array<std::pair<double, double>, 4> src = {{{0, 0}, {w, 0}, {w, h}, {0, h}}};
  std::array<std::pair<double, double>, 4> dst;
  for (int i = 0; i < 4; ++i)
    dst[size_t(i)] = {src[size_t(i)].first + corner_shift[size_t(i)].first,
                      src[size_t(i)].second + corner_shift[size_t(i)].second};
  auto hom = homography_from_corners(dst, src);
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double denom = hom[6] * x + hom[7] * y + hom[8];
      double sx = (hom[0] * x + hom[1] * y + hom[2]) / denom;
      double sy = (hom[3] * x + hom[4] * y + hom[5]) / denom;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = clamp_u8(sample_bilinear_reflect(img, sy, sx, c));
    }
  }
  return out;
}

ApplyResult apply_once(const Image& img, const AugmentationSpec& spec, Rng& rng) {
  if (img.empty()) fail("apply_once: empty image");
  spec.validate();
  ApplyResult res;
  res.image = img;
  std::ostringstream applied;
  bool first = true;
  auto note = [&](const std::string& kv) {
    if (!first) applied << ';';
    applied << kv;
    first = false;
  };

  for (const auto& op : spec.ops) {
    // Draw the gate for every op unconditionally so the stream layout is
    // independent of earlier outcomes.
    const bool fire = rng.next_double() < op.probability;
    switch (op.kind) {
      case AugKind::FlipLrOrUd: {
        const bool lr = rng.next_below(2) == 0;
        if (!fire) break;
        res.image = lr ? flip_horizontal(res.image) : flip_vertical(res.image);
        note(std::string("flip=") + (lr ? "lr" : "ud"));
        break;
      }
      case AugKind::SmallRotation: {
        const double deg = rng.next_range(-op.max_deg, op.max_deg);
        if (!fire) break;
        res.image = rotate_small(res.image, deg);
        note("small_rotation=" + fmt_double(deg, 4));
        break;
      }
      case AugKind::RightAngleRotation: {
        static constexpr int kChoices[3] = {90, 180, 270};
        const int deg = kChoices[rng.next_below(3)];
        if (!fire) break;
        res.image = rotate_right_angle(res.image, deg);
        note("right_angle_rotation=" + std::to_string(deg));
        break;
      }
      case AugKind::Brightness:
      case AugKind::Contrast:
      case AugKind::Saturation: {
        const double f = rng.next_range(op.min_f, op.max_f);
        if (!fire) break;
        if (op.kind == AugKind::Brightness) res.image = adjust_brightness(res.image, f);
        else if (op.kind == AugKind::Contrast) res.image = adjust_contrast(res.image, f);
        else res.image = adjust_saturation(res.image, f);
        note(std::string(aug_kind_name(op.kind)) + "=" + fmt_double(f, 4));
        break;
      }
      case AugKind::PerspectiveSkew: {
        const double mag = op.magnitude * std::min(res.image.width, res.image.height);
        std::array<std::pair<double, double>, 4> shift;
        for (int i = 0; i < 4; ++i) {
          shift[size_t(i)] = {rng.next_range(-mag, mag), rng.next_range(-mag, mag)};
        }
        if (!fire) break;
        res.image = perspective_skew(res.image, shift);
        note("perspective_skew=" + fmt_double(op.magnitude, 4));
        break;
      }
    }
  }
  res.ops_applied = applied.str();
  return res;
}

AugmentedSet expand(const std::vector<std::string>& train_ids, const Manifest& manifest,
                    const AugmentationSpec& spec, uint64_t seed, const fs::path& out_dir) {
  spec.validate();
  AugmentedSet set;
  fs::create_directories(out_dir);
  for (const auto& id : train_ids) {
    if (!manifest.has_id(id)) fail("expand: id not present in manifest: " + id);
  }
  for (const auto& id : train_ids) {
    const ImageRecord& rec = manifest.by_id(id);
    Image src;
    try {
      src = load_image(rec.path);
    } catch (const Error& e) {
      fail("expand: cannot load source image for id '" + id + "': " + e.what());
    }
    std::string safe_id = id;
    std::replace(safe_id.begin(), safe_id.end(), '/', '_');
    const uint64_t source_seed = substream_seed(seed, "augment-source:" + id);
    for (int rep = 0; rep < spec.expansion_factor; ++rep) {
      Rng rng(substream_seed(source_seed, "replica:" + std::to_string(rep)));
      ApplyResult r = apply_once(src, spec, rng);
      AugmentedItem item;
      item.out_path = (out_dir / (safe_id + "_" + std::to_string(rep) + ".png")).string();
      item.source_id = id;
      item.replica = rep;
      item.ops_applied = r.ops_applied;
      item.label = rec.label;
      save_png(item.out_path, r.image);
      set.items.push_back(std::move(item));
    }
  }
  return set;
}

void write_lineage_csv(const fs::path& path, const AugmentedSet& set) {
  std::ostringstream out;
  out << "out_path,source_id,replica,ops_applied\n";
  for (const auto& it : set.items) {
    out << csv_escape(it.out_path) << ',' << csv_escape(it.source_id) << ',' << it.replica << ','
        << csv_escape(it.ops_applied) << '\n';
  }
  write_text_file(path, out.str());
}

AugmentedSet read_lineage_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "out_path,source_id,replica,ops_applied")
    fail("unexpected lineage header in " + path.string());
  AugmentedSet set;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = csv_parse_line(lines[i]);
    if (f.size() != 4) fail("bad lineage row in " + path.string());
    AugmentedItem item;
    item.out_path = f[0];
    item.source_id = f[1];
    item.replica = std::stoi(f[2]);
    item.ops_applied = f[3];
    set.items.push_back(std::move(item));
  }
  return set;
}

}  // namespace lymebench
