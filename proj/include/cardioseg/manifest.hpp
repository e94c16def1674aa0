#pragma once

// Dataset manifest: one sample per line,
//   image_path<TAB>label_path<TAB>modality<TAB>center
// with `-` as the label path for unlabeled inference lists. Relative paths
// resolve against the manifest's directory. CT samples come from centers
// A/B, MR samples from centers C&D/E.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cardioseg/detail/textio.hpp"
#include "cardioseg/errors.hpp"
#include "cardioseg/preprocess.hpp"
#include "cardioseg/rng.hpp"

namespace cardioseg {

struct SampleEntry {
  std::filesystem::path image;
  std::filesystem::path labels;  // empty for unlabeled entries
  Modality modality = Modality::CT;
  std::string center;
};

struct DatasetIndex {
  std::vector<SampleEntry> entries;
  std::vector<std::size_t> ct_pool;  // indices into entries
  std::vector<std::size_t> mr_pool;
  std::map<std::string, int> center_counts;
};

inline DatasetIndex build_index(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(Errc::io, "cannot open manifest: " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();

  DatasetIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1)
      fields.push_back(line.substr(start, pos - start));
    fields.push_back(std::string(detail::trim(line.substr(start))));
    if (fields.size() != 4)
      fail(Errc::manifest, "manifest line " + std::to_string(line_no) +
                               ": expected 4 tab-separated fields");

    SampleEntry e;
    e.image = fields[0];
    if (e.image.is_relative()) e.image = base / e.image;
    if (!std::filesystem::exists(e.image))
      fail(Errc::io, "manifest line " + std::to_string(line_no) +
                         ": missing image file " + e.image.string());
    if (fields[1] != "-") {
      e.labels = fields[1];
      if (e.labels.is_relative()) e.labels = base / e.labels;
      if (!std::filesystem::exists(e.labels))
        fail(Errc::io, "manifest line " + std::to_string(line_no) +
                           ": missing label file " + e.labels.string());
    }

    if (fields[2] == "CT") e.modality = Modality::CT;
    else if (fields[2] == "MR") e.modality = Modality::MR;
    else fail(Errc::manifest, "manifest line " + std::to_string(line_no) +
                                  ": unknown modality tag '" + fields[2] + "'");

    e.center = fields[3];
    const bool ct_center = e.center == "A" || e.center == "B";
    const bool mr_center = e.center == "C&D" || e.center == "E";
    if (!ct_center && !mr_center)
      fail(Errc::manifest, "manifest line " + std::to_string(line_no) +
                               ": unknown center tag '" + e.center + "'");
    if (e.modality == Modality::CT && !ct_center)
      fail(Errc::manifest, "manifest line " + std::to_string(line_no) +
                               ": CT sample must come from center A or B");
    if (e.modality == Modality::MR && !mr_center)
      fail(Errc::manifest, "manifest line " + std::to_string(line_no) +
                               ": MR sample must come from center C&D or E");

    index.center_counts[e.center] += 1;
    const std::size_t idx = index.entries.size();
    index.entries.push_back(std::move(e));
    if (index.entries.back().modality == Modality::CT) index.ct_pool.push_back(idx);
    else index.mr_pool.push_back(idx);
  }

  if (index.entries.empty())
    fail(Errc::manifest, "manifest is empty: " + manifest_path.string());
  return index;
}

// One uniform draw per pool; the batch always pairs one CT with one MR sample.
inline std::pair<std::size_t, std::size_t> sample_joint_batch(const DatasetIndex& index,
                                                              Rng& rng) {
  if (index.ct_pool.empty()) fail(Errc::sampling, "sample_joint_batch: CT pool is empty");
  if (index.mr_pool.empty()) fail(Errc::sampling, "sample_joint_batch: MR pool is empty");
  const std::size_t ct =
      index.ct_pool[static_cast<std::size_t>(rng.uniform_int(0, index.ct_pool.size() - 1))];
  const std::size_t mr =
      index.mr_pool[static_cast<std::size_t>(rng.uniform_int(0, index.mr_pool.size() - 1))];
  return {ct, mr};
}

}  // namespace cardioseg
