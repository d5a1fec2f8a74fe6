#pragma once

// Flat key-value parameter files.
//
//   # reference setup at 20 dB
//   loss_db = 20
//   detector_efficiency = 0.145
//   p_d = 3e-6
//
// One "key = value" per line; '#' starts a comment. Unknown or repeated keys
// are errors. The channel is given either as eta_a and eta_b directly or as
// loss_db (+ asymmetry, detector_efficiency), not both.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mdiqkd/params.hpp"

namespace mdiqkd {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& key, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + (key.empty() ? "" : ": '" + key + "'") +
                           ": " + what),
        line_(line),
        key_(key) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

/// Everything a parameter file can set. Unset optionals fall back to the
/// reference-setup defaults or to CLI flags.
struct ParamSettings {
  std::optional<double> eta_a;
  std::optional<double> eta_b;
  std::optional<double> loss_db;
  double asymmetry = 0.5;
  double detector_efficiency = reference::detector_efficiency;
  double p_d = reference::dark_count;
  double f = reference::ec_inefficiency;
  double e_d = reference::misalignment;
  double sift_factor = 1.0;
  std::optional<double> mu_a;
  std::optional<double> mu_b;

  bool has_direct_channel() const { return eta_a.has_value(); }

  /// Experiment parameters at the given total loss. Without a loss the file's
  /// own channel is used (eta_a/eta_b, else loss_db, else 0 dB).
  ExperimentParams resolve(std::optional<double> loss_override = std::nullopt) const {
    ExperimentParams p;
    p.p_d = p_d;
    p.f = f;
    p.e_d = e_d;
    p.sift_factor = sift_factor;
    if (loss_override || !has_direct_channel()) {
      const ChannelTransmittance ch =
          channel_from_loss(loss_override.value_or(loss_db.value_or(0.0)), detector_efficiency, asymmetry);
      p.eta_a = ch.eta_a;
      p.eta_b = ch.eta_b;
    } else {
      p.eta_a = *eta_a;
      p.eta_b = *eta_b;
    }
    p.validate();
    return p;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> to_double(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline ParamSettings parse_params(std::istream& in, const std::string& source = "<params>") {
  ParamSettings s;
  struct Key {
    const char* name;
    double* plain;
    std::optional<double>* optional;
    bool seen;
  };
  Key keys[] = {
      {"eta_a", nullptr, &s.eta_a, false},
      {"eta_b", nullptr, &s.eta_b, false},
      {"loss_db", nullptr, &s.loss_db, false},
      {"asymmetry", &s.asymmetry, nullptr, false},
      {"detector_efficiency", &s.detector_efficiency, nullptr, false},
      {"p_d", &s.p_d, nullptr, false},
      {"f", &s.f, nullptr, false},
      {"e_d", &s.e_d, nullptr, false},
      {"sift_factor", &s.sift_factor, nullptr, false},
      {"mu_a", nullptr, &s.mu_a, false},
      {"mu_b", nullptr, &s.mu_b, false},
  };

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(source, line_no, "", "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));

    Key* match = nullptr;
    for (Key& k : keys)
      if (key == k.name) match = &k;
    if (match == nullptr) throw ParseError(source, line_no, key, "unknown key");
    if (match->seen) throw ParseError(source, line_no, key, "duplicate key");
    match->seen = true;

    const auto number = detail::to_double(value);
    if (!number) throw ParseError(source, line_no, key, "not a number: '" + std::string(value) + "'");
    if (match->plain) *match->plain = *number;
    else *match->optional = *number;
  }

  if (s.eta_a.has_value() != s.eta_b.has_value())
    throw ParseError(source, line_no, s.eta_a ? "eta_a" : "eta_b", "eta_a and eta_b must be given together");
  if (s.eta_a && s.loss_db)
    throw ParseError(source, line_no, "loss_db", "give either eta_a/eta_b or loss_db, not both");
  if (s.mu_a.has_value() != s.mu_b.has_value())
    throw ParseError(source, line_no, s.mu_a ? "mu_a" : "mu_b", "mu_a and mu_b must be given together");

  // Range checks via the library types, reported against the file.
  try {
    s.resolve();
    if (s.mu_a) SourceIntensities{*s.mu_a, *s.mu_b}.validate();
  } catch (const std::exception& e) {
    throw ParseError(source, line_no, "", e.what());
  }
  return s;
}

inline ParamSettings parse_params_string(const std::string& text, const std::string& source = "<params>") {
  std::istringstream in(text);
  return parse_params(in, source);
}

inline ParamSettings load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "", "cannot open file");
  return parse_params(in, path);
}

}  // namespace mdiqkd
