#pragma once

// Checkpoint file: a text header (NetConfig as key-value lines plus a tensor
// table) followed by the concatenated little-endian float32 payloads in
// declared order. Raw weights, the EMA shadow and the Adam state all live in
// one file, and the round trip is bit-exact.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cardioseg/detail/textio.hpp"
#include "cardioseg/errors.hpp"
#include "cardioseg/unet.hpp"

namespace cardioseg {

inline constexpr const char* kCheckpointMagic = "cardioseg-checkpoint 1";

inline void save_checkpoint(const std::filesystem::path& path, const Model<float>& model) {
  std::vector<std::pair<std::string, const std::vector<float>*>> tensors;
  model.net.visit_params([&](const std::string& name, const std::vector<float>& p) {
    tensors.emplace_back(name, &p);
  });
  int idx = 0;
  model.net.visit_params([&](const std::string& name, const std::vector<float>&) {
    tensors.emplace_back("ema." + name, &model.ema.t[idx]);
    ++idx;
  });
  idx = 0;
  model.net.visit_params([&](const std::string& name, const std::vector<float>&) {
    tensors.emplace_back("adam.m." + name, &model.adam.m[idx]);
    tensors.emplace_back("adam.v." + name, &model.adam.v[idx]);
    ++idx;
  });

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write checkpoint: " + path.string());
  out << kCheckpointMagic << "\n";
  out << "levels = " << model.net.cfg.levels << "\n";
  out << "filters = " << model.net.cfg.filters << "\n";
  out << "dropout_rate = " << detail::format_double(model.net.cfg.dropout_rate) << "\n";
  out << "leaky_slope = " << detail::format_double(model.net.cfg.leaky_slope) << "\n";
  out << "classes = " << model.net.cfg.classes << "\n";
  out << "adam_step = " << model.adam.step << "\n";
  for (const auto& [name, data] : tensors)
    out << "tensor " << name << " " << data->size() << "\n";
  out << "end-header\n";
  for (const auto& [name, data] : tensors) {
    for (float f : *data) {
      const auto u = std::bit_cast<std::uint32_t>(f);
      const char bytes[4] = {char(u & 0xff), char((u >> 8) & 0xff), char((u >> 16) & 0xff),
                             char((u >> 24) & 0xff)};
      out.write(bytes, 4);
    }
  }
  out.flush();
  if (!out) fail(Errc::io, "failed writing checkpoint: " + path.string());
}

inline Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open checkpoint: " + path.string());

  auto next_line = [&in, &path]() {
    std::string line;
    if (!std::getline(in, line)) fail(Errc::format, "truncated checkpoint header: " + path.string());
    return line;
  };
  if (next_line() != kCheckpointMagic)
    fail(Errc::format, "not a checkpoint file: " + path.string());

  NetConfig cfg;
  long step = 0;
  std::vector<std::pair<std::string, std::size_t>> table;
  for (std::string line = next_line(); line != "end-header"; line = next_line()) {
    if (line.rfind("tensor ", 0) == 0) {
      const auto parts = detail::split_ws(line);
      if (parts.size() != 3) fail(Errc::format, "garbled tensor line: " + line);
      table.emplace_back(std::string(parts[1]),
                         std::size_t(detail::parse_int(parts[2], Errc::format, "tensor size")));
      continue;
    }
    std::string_view key, value;
    if (!detail::split_key_value(line, key, value))
      fail(Errc::format, "garbled checkpoint header line: " + line);
    if (key == "levels") cfg.levels = int(detail::parse_int(value, Errc::format, "levels"));
    else if (key == "filters") cfg.filters = int(detail::parse_int(value, Errc::format, "filters"));
    else if (key == "dropout_rate") cfg.dropout_rate = detail::parse_double(value, Errc::format, "dropout_rate");
    else if (key == "leaky_slope") cfg.leaky_slope = detail::parse_double(value, Errc::format, "leaky_slope");
    else if (key == "classes") cfg.classes = int(detail::parse_int(value, Errc::format, "classes"));
    else if (key == "adam_step") step = detail::parse_int(value, Errc::format, "adam_step");
    else fail(Errc::format, "unknown checkpoint key: " + std::string(key));
  }
  cfg.validate();

  // Build the skeleton for this config, then require the table to match it.
  Model<float> model;
  model.net = build_unet<float>(cfg);
  model.ema = make_ema_shadow(model.net);
  model.adam = AdamState<float>{};
  model.adam.step = step;
  model.adam.m.resize(model.net.tensor_count());
  model.adam.v.resize(model.net.tensor_count());

  std::vector<std::pair<std::string, std::vector<float>*>> expected;
  model.net.visit_params([&](const std::string& name, std::vector<float>& p) {
    expected.emplace_back(name, &p);
  });
  int idx = 0;
  model.net.visit_params([&](const std::string& name, std::vector<float>&) {
    expected.emplace_back("ema." + name, &model.ema.t[idx]);
    ++idx;
  });
  idx = 0;
  model.net.visit_params([&](const std::string& name, std::vector<float>& p) {
    model.adam.m[idx].resize(p.size());
    model.adam.v[idx].resize(p.size());
    expected.emplace_back("adam.m." + name, &model.adam.m[idx]);
    expected.emplace_back("adam.v." + name, &model.adam.v[idx]);
    ++idx;
  });

  if (table.size() != expected.size())
    fail(Errc::format, "checkpoint tensor table does not match the declared config");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].first != expected[i].first || table[i].second != expected[i].second->size())
      fail(Errc::format, "checkpoint tensor mismatch at '" + table[i].first + "'");
  }

  for (auto& [name, dst] : expected) {
    std::vector<char> bytes(dst->size() * 4);
    in.read(bytes.data(), std::streamsize(bytes.size()));
    if (std::size_t(in.gcount()) != bytes.size())
      fail(Errc::truncation, "checkpoint payload truncated at tensor '" + name + "'");
    for (std::size_t i = 0; i < dst->size(); ++i) {
      const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + i * 4);
      const std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                              (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
      (*dst)[i] = std::bit_cast<float>(u);
    }
  }
  if (in.peek() != std::char_traits<char>::eof())
    fail(Errc::format, "trailing bytes after checkpoint payload: " + path.string());
  return model;
}

}  // namespace cardioseg
