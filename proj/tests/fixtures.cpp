#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

namespace fixtures {

using amrg::BitDepth;
using amrg::GrayImage;

auto metric_pairs() -> const std::vector<TextPair> & {
  static const std::vector<TextPair> pairs{
      {"the cat sat on the mat", "the cat sat on the mat"},
      {"the the the", "the cat sat"},
      {"mass in the left breast", "left breast mass"},
      {"spiculated mass with architectural distortion", "architectural distortion and a spiculated mass"},
      {"no suspicious calcifications", "no suspicious microcalcifications or masses"},
      {"BI-RADS 4c, biopsy recommended.", "BI-RADS 4c; tissue sampling recommended."},
      {"heterogeneously dense breasts", "the breasts are heterogeneously dense"},
      {"scattered areas of fibroglandular density", "scattered fibroglandular densities"},
      {"", "negative mammogram"},
      {"negative mammogram", ""},
      {"calcified lymph node in the axilla", "benign calcified lymph node in the right axilla"},
      {"oval mass, circumscribed margins", "an oval mass with circumscribed margins"},
      {"masses masses", "mass"},
      {"findings are stable compared to prior", "stable findings compared with prior study"},
      {"right breast skin thickening", "skin thickening of the right breast"},
      {"follow up in six months", "six month follow-up recommended"},
      {"BI-RADS 2: benign", "BI-RADS 3: probably benign"},
      {"extremely dense tissue which lowers sensitivity",
       "the breast tissue is extremely dense which lowers the sensitivity of mammography"},
      {"a b c d e", "e d c b a"},
      {"asymmetry in the upper outer quadrant", "focal asymmetry upper outer quadrant left breast"},
      {"architectural distortions", "architectural distortion"},
      {"one two three four five six seven eight nine ten", "one two three"},
      {"mass mass mass calcification", "mass calcification mass"},
      {"", ""},
  };
  return pairs;
}

auto cider_corpus() -> const std::vector<TextPair> & {
  static const std::vector<TextPair> docs{
      {"spiculated mass in the left breast", "spiculated mass in the upper left breast"},
      {"no suspicious mass or calcification", "no mass no suspicious calcification"},
      {"heterogeneously dense breast tissue", "the breast tissue is heterogeneously dense"},
      {"calcified lymph node in the axilla", "benign lymph node in the left axilla"},
      {"oval mass with circumscribed margins", "oval mass with circumscribed margins"},
  };
  return docs;
}

auto clinical_corpus() -> const std::vector<LabeledReport> & {
  static const std::vector<LabeledReport> reports{
      {"Incomplete study, additional imaging needed. Almost entirely fatty breasts. BI-RADS 0.", "0", "a"},
      {"BI-RADS category 0: recall for spot compression. ACR density b.", "0", "b"},
      {"The breasts are heterogeneously dense. Assessment: BIRADS 0", "0", "c"},
      {"Negative mammogram. Fatty breasts. BI-RADS 1.", "1", "a"},
      {"No mass or suspicious calcification. Scattered areas of fibroglandular density. BI-RADS: 1", "1", "b"},
      {"ACR BI-RADS category 1. Breast composition: c.", "1", "c"},
      {"Extremely dense tissue lowers sensitivity. Negative. BI-RADS 1", "1", "d"},
      {"Benign calcified lymph node. Fibro-fatty parenchyma. BI-RADS 2", "2", "a"},
      {"Stable benign calcifications. ACR density category b. Final assessment BI-RADS 2.", "2", "b"},
      {"Intramammary lymph node, benign. Density: d. BI-RADS code 2.", "2", "d"},
      {"Oval circumscribed mass, probably benign. Predominantly fatty. BI-RADS 3", "3", "a"},
      {"BI-RADS 3, short interval follow-up in six months. Scattered fibroglandular tissue.", "3", "b"},
      {"Focal asymmetry. ACR c. BI-RADS 3.", "3", "c"},
      {"Left breast probably benign; right breast highly suggestive. BI-RADS 3 and 5. Heterogeneously dense.",
       "3 and 5", "c"},
      {"Bilateral findings, BIRADS 3 and 5, extremely dense breasts.", "3 and 5", "d"},
      {"Suspicious abnormality. BI-RADS 4. Density category a.", "4", "a"},
      {"Irregular mass. The breast composition is heterogeneously dense. BI-RADS 4", "4", "c"},
      {"Low suspicion for malignancy, BI-RADS 4a. Scattered areas of fibroglandular density.", "4a", "b"},
      {"BI-RADS 4A: cluster of amorphous calcifications. Extremely dense.", "4a", "d"},
      {"Indistinct margins. ACR breast density c. BI-RADS category 4a.", "4a", "c"},
      {"Moderate suspicion. Fibrofatty breasts. BI-RADS 4b", "4b", "a"},
      {"BI-RADS 4B, pleomorphic calcifications. ACR density b.", "4b", "b"},
      {"Spiculated mass with architectural distortion. Heterogeneously dense. BI-RADS 4c.", "4c", "c"},
      {"High suspicion, fine linear calcifications in segmental distribution. ACR density: d. BI-RADS 4C", "4c", "d"},
      {"Prior report said BI-RADS 2; today spiculated mass, BI-RADS 4c. Scattered fibroglandular.", "4c", "b"},
      {"Highly suggestive of malignancy. Fatty breasts. BI-RADS 5.", "5", "a"},
      {"Irregular spiculated mass with nipple retraction. Composition category c. BIRADS 5", "5", "c"},
      {"BI-RADS assessment: 5. Extremely dense breast tissue.", "5", "d"},
      {"Known biopsy-proven malignancy. ACR BI-RADS 6. Scattered areas of fibroglandular density.", "6", "b"},
      {"Earlier heterogeneously dense, now ACR density d. BI-RADS 2 then revised to BI-RADS 4b.", "4b", "d"},
  };
  return reports;
}

auto bimodal_image(std::uint64_t seed, int size) -> GrayImage {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level_lo(30, 70), level_hi(150, 210);
  const double lo = level_lo(rng), hi = level_hi(rng);
  std::normal_distribution<double> noise(0.0, 8.0);
  GrayImage img(size, size, BitDepth::Eight);
  const double cx = size / 2.0, cy = size / 2.0, r = size / 3.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool inside = std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r;
      const double v = (inside ? hi : lo) + noise(rng);
      img.at(x, y) = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

auto random_image(std::uint64_t seed, int width, int height) -> GrayImage {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  GrayImage img(width, height, BitDepth::Eight);
  for (auto &p : img.pixels()) p = static_cast<std::uint16_t>(dist(rng));
  return img;
}

auto left_breast_phantom(int width, int height) -> GrayImage {
  GrayImage img(width, height, BitDepth::Eight, 5);
  const double cy = height / 2.0, rx = width * 0.55, ry = height * 0.4;
  const double bx = rx * 0.3, by = cy - ry * 0.2, br = std::min(rx, ry) * 0.12;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double ex = (x + 0.5) / rx, ey = (y + 0.5 - cy) / ry;
      if (ex * ex + ey * ey > 1.0) continue;
      const bool blob = std::hypot(x + 0.5 - bx, y + 0.5 - by) < br;
      img.at(x, y) = blob ? 240 : 120;
    }
  }
  return img;
}

auto dataset_counts() -> std::vector<std::tuple<amrg::ingest::Split, std::string, long>> {
  using amrg::ingest::Split;
  const std::vector<std::tuple<std::string, long, long, long>> table{
      {"0", 1, 0, 0},   {"1", 157, 30, 22}, {"2", 24, 1, 5}, {"3", 109, 10, 9}, {"3 and 5", 1, 0, 0},
      {"4", 3, 0, 0},   {"4a", 31, 1, 5},   {"4b", 26, 0, 5}, {"4c", 39, 7, 6}, {"5", 16, 2, 0},
  };
  std::vector<std::tuple<Split, std::string, long>> out;
  for (const auto &[label, train, val, test] : table) {
    if (train) out.emplace_back(Split::Train, label, train);
    if (val) out.emplace_back(Split::Val, label, val);
    if (test) out.emplace_back(Split::Test, label, test);
  }
  return out;
}

auto dataset_manifest() -> std::vector<amrg::ingest::ReportRecord> {
  std::vector<amrg::ingest::ReportRecord> records;
  int id = 0;
  for (const auto &[split, label, count] : dataset_counts()) {
    for (long i = 0; i < count; ++i) {
      amrg::ingest::ReportRecord rec;
      rec.case_id = "case" + std::to_string(id++);
      rec.image_paths = {"images/" + rec.case_id + ".png"};
      rec.laterality = id % 2 ? amrg::Laterality::Left : amrg::Laterality::Right;
      rec.report_text = "BI-RADS " + label + ".";
      rec.birads_gold = amrg::BiradsLabel::parse(label);
      rec.split = split;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

} // namespace fixtures
