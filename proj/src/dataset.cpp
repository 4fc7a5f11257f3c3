#include "histo/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/rng.hpp"

namespace fs = std::filesystem;

namespace histo {

std::array<int, kNumClasses> Manifest::counts() const {
  std::array<int, kNumClasses> c{};
  for (const auto& e : entries) ++c[index_of(e.label)];
  return c;
}

namespace {

void add_empty_class_warnings(Manifest& m) {
  const auto counts = m.counts();
  for (ClassLabel l : kAllLabels) {
    if (counts[index_of(l)] == 0) {
      m.warnings.push_back("EmptyClass: no images for " + std::string(label_name(l)));
    }
  }
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

Manifest load_manifest_dir(const fs::path& root) {
  Manifest m;
  if (!fs::is_directory(root)) throw Error(ErrorCode::IoError, root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto label = parse_label(dir.filename().string());
    if (!label) throw Error(ErrorCode::UnknownLabel, "directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) m.entries.push_back({f.string(), *label});
  }
  add_empty_class_warnings(m);
  return m;
}

Manifest parse_manifest_csv(const std::string& text, const fs::path& base) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line == "path,label") continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "manifest line " + std::to_string(line_no) +
                                                  ": expected path,label");
    }
    std::string path = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    const auto label = parse_label(label_text);
    if (!label) {
      throw Error(ErrorCode::UnknownLabel, "'" + label_text + "' on line " + std::to_string(line_no));
    }
    if (!base.empty() && fs::path(path).is_relative()) path = (base / path).string();
    if (!seen.insert(path).second) throw Error(ErrorCode::DuplicatePath, path);
    m.entries.push_back({path, *label});
  }
  add_empty_class_warnings(m);
  return m;
}

Manifest load_manifest(const fs::path& source) {
  if (fs::is_directory(source)) return load_manifest_dir(source);
  std::ifstream in(source);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + source.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest_csv(ss.str(), source.parent_path());
}

std::string manifest_to_csv(const Manifest& manifest) {
  std::string out = "path,label\n";
  for (const auto& e : manifest.entries) {
    out += e.path;
    out += ',';
    out += label_name(e.label);
    out += '\n';
  }
  return out;
}

void write_manifest_csv(const fs::path& path, const Manifest& manifest) {
  const std::string csv = manifest_to_csv(manifest);
  write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()});
}

void SplitRatios::validate() const {
  if (train < 0 || valid < 0 || test < 0) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must be non-negative");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
  }
}

std::array<int, 3> apportion(int n, const SplitRatios& ratios) {
  ratios.validate();
  const std::array<double, 3> r = {ratios.train, ratios.valid, ratios.test};
  std::array<int, 3> counts{};
  std::array<double, 3> remainder{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double quota = r[i] * n;
    double whole = std::floor(quota);
    if (quota - whole > 1.0 - 1e-9) whole += 1.0;  // 28.999999999999996 is 29
    counts[i] = static_cast<int>(whole);
    remainder[i] = std::max(0.0, quota - whole);
    assigned += counts[i];
  }
  for (int left = n - assigned; left > 0; --left) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainder[i] > remainder[best] + 1e-12) best = i;
    ++counts[best];
    remainder[best] = -1.0;
  }
  return counts;
}

SplitResult split(const Manifest& manifest, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  Rng rng(seed);
  SplitResult out;
  for (ClassLabel label : kAllLabels) {
    std::vector<ManifestEntry> members;
    for (const auto& e : manifest.entries)
      if (e.label == label) members.push_back(e);
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    const auto counts = apportion(static_cast<int>(members.size()), ratios);
    auto it = members.begin();
    out.train.entries.insert(out.train.entries.end(), it, it + counts[0]);
    it += counts[0];
    out.valid.entries.insert(out.valid.entries.end(), it, it + counts[1]);
    it += counts[1];
    out.test.entries.insert(out.test.entries.end(), it, members.end());
  }
  return out;
}

void write_split(const fs::path& dir, const SplitResult& result, const SplitRatios& ratios,
                 std::uint64_t seed) {
  fs::create_directories(dir);
  auto absolute = [](Manifest m) {
    for (auto& e : m.entries) e.path = fs::absolute(e.path).lexically_normal().string();
    return m;
  };
  write_manifest_csv(dir / "train.csv", absolute(result.train));
  write_manifest_csv(dir / "valid.csv", absolute(result.valid));
  write_manifest_csv(dir / "test.csv", absolute(result.test));
  auto per_class = [](const Manifest& m) {
    nlohmann::json j = nlohmann::json::object();
    const auto c = m.counts();
    for (ClassLabel l : kAllLabels) j[std::string(label_name(l))] = c[index_of(l)];
    j["total"] = m.size();
    return j;
  };
  nlohmann::json summary = {
      {"seed", seed},
      {"ratios", {{"train", ratios.train}, {"valid", ratios.valid}, {"test", ratios.test}}},
      {"counts",
       {{"train", per_class(result.train)},
        {"valid", per_class(result.valid)},
        {"test", per_class(result.test)}}}};
  const std::string text = summary.dump(2) + "\n";
  write_file_atomic(dir / "summary.json",
                    {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::array<ClassTexture, kNumClasses> SyntheticConfig::default_textures() {
  return {{
      {{236, 204, 220}, {128, 72, 140}, 6, 2, 5},    // Normal: pale pink, sparse nuclei
      {{214, 170, 236}, {96, 64, 168}, 12, 2, 5},    // Benign: lavender
      {{188, 136, 196}, {72, 40, 112}, 24, 2, 6},    // InSitu: mauve, crowded
      {{150, 104, 178}, {56, 28, 88}, 40, 3, 7},     // Invasive: dark violet, dense
  }};
}

Image synthesize_image(const SyntheticConfig& cfg, ClassLabel label, int index) {
  const int n = cfg.image_size;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "image_size must be >= 1");
  const ClassTexture& tex = cfg.textures[index_of(label)];
  // Independent stream per (class, index) so images do not depend on generation order.
  Rng rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index_of(label)) * 1000003ULL +
                                               static_cast<std::uint64_t>(index) + 1)));
  Image img(n, n, 3);
  auto jitter = [&](int base) {
    const int v = base + static_cast<int>(rng.below(2 * cfg.noise + 1)) - cfg.noise;
    return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  };
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = jitter(tex.background[c]);

  const int nuclei = std::max(1, tex.nuclei * n * n / (128 * 128));
  for (int k = 0; k < nuclei; ++k) {
    const double cx = rng.uniform(0, n);
    const double cy = rng.uniform(0, n);
    const double rx = rng.uniform(tex.min_radius, tex.max_radius);
    const double ry = rng.uniform(tex.min_radius, tex.max_radius);
    const double theta = rng.uniform(0, 3.141592653589793);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const int r = static_cast<int>(std::ceil(std::max(rx, ry)));
    for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(n - 1, static_cast<int>(cy) + r); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(n - 1, static_cast<int>(cx) + r); ++x) {
        const double u = (x - cx) * cs + (y - cy) * sn;
        const double v = -(x - cx) * sn + (y - cy) * cs;
        if ((u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0) {
          for (int c = 0; c < 3; ++c) img.at(x, y, c) = jitter(tex.nucleus[c]);
        }
      }
    }
  }
  return img;
}

Manifest generate_synthetic(const SyntheticConfig& cfg, const fs::path& out_dir) {
  if (cfg.images_per_class < 0) throw Error(ErrorCode::InvalidArgument, "images_per_class < 0");
  Manifest m;
  Manifest relative;  // CSV paths are relative to the CSV's own directory
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  for (ClassLabel label : kAllLabels) {
    const fs::path dir = out_dir / std::string(label_name(label));
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    for (int i = 0; i < cfg.images_per_class; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "img_%04d.png", i);
      const fs::path path = dir / name;
      write_png(path, synthesize_image(cfg, label, i));
      m.entries.push_back({path.string(), label});
      relative.entries.push_back({(fs::path(label_name(label)) / name).string(), label});
    }
  }
  write_manifest_csv(out_dir / "manifest.csv", relative);
  add_empty_class_warnings(m);
  return m;
}

std::vector<LabeledPatch> labeled_patches(const Image& image, ClassLabel label,
                                          const TileSpec& spec) {
  auto tiling = extract_patches(image, spec);
  std::vector<LabeledPatch> out;
  out.reserve(tiling.patches.size());
  for (auto& p : tiling.patches) out.push_back({std::move(p), label});
  return out;
}

}  // namespace histo
