#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "didfuse/error.hpp"
#include "didfuse/trainer.hpp"

namespace didfuse {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: invalid value '" + std::string(text) + "' for key '" + key + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Applies one `key = value` setting. Unknown keys are rejected.
inline void apply_config_value(TrainConfig& c, const std::string& key, std::string_view value) {
  using detail::parse_number;
  if (key == "epochs") c.epochs = parse_number<int>(value, key);
  else if (key == "batch_size") c.batch_size = parse_number<int>(value, key);
  else if (key == "lr0") c.lr0 = parse_number<double>(value, key);
  else if (key == "lr_decay_factor") c.lr_decay_factor = parse_number<double>(value, key);
  else if (key == "lr_decay_every") c.lr_decay_every = parse_number<int>(value, key);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(value, key);
  else if (key == "alpha1") c.loss_weights.alpha1 = parse_number<double>(value, key);
  else if (key == "alpha2") c.loss_weights.alpha2 = parse_number<double>(value, key);
  else if (key == "alpha3") c.loss_weights.alpha3 = parse_number<double>(value, key);
  else if (key == "alpha4") c.loss_weights.alpha4 = parse_number<double>(value, key);
  else if (key == "lambda") c.loss_weights.lambda = parse_number<double>(value, key);
  else if (key == "crop_height") c.crop_height = parse_number<int>(value, key);
  else if (key == "crop_width") c.crop_width = parse_number<int>(value, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

// Line-oriented `key = value`; '#' starts a comment. Starts from `base`.
inline TrainConfig parse_config(std::istream& in, TrainConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = line;
    if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    sv = detail::trim(sv);
    if (sv.empty()) continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_config_value(base, std::string(detail::trim(sv.substr(0, eq))), detail::trim(sv.substr(eq + 1)));
  }
  base.validate();
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  return parse_config(in, base);
}

// Round-trips exactly through parse_config.
inline std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "lr0 = " << detail::format_double(c.lr0) << '\n'
     << "lr_decay_factor = " << detail::format_double(c.lr_decay_factor) << '\n'
     << "lr_decay_every = " << c.lr_decay_every << '\n'
     << "seed = " << c.seed << '\n'
     << "alpha1 = " << detail::format_double(c.loss_weights.alpha1) << '\n'
     << "alpha2 = " << detail::format_double(c.loss_weights.alpha2) << '\n'
     << "alpha3 = " << detail::format_double(c.loss_weights.alpha3) << '\n'
     << "alpha4 = " << detail::format_double(c.loss_weights.alpha4) << '\n'
     << "lambda = " << detail::format_double(c.loss_weights.lambda) << '\n'
     << "crop_height = " << c.crop_height << '\n'
     << "crop_width = " << c.crop_width << '\n';
  return os.str();
}

}  // namespace didfuse
