#include "echosim/acoustics.hpp"

#include "echosim/errors.hpp"
#include "echosim/phantom.hpp"

#include <fstream>
#include <iostream>
#include <mutex>
#include <set>

namespace echosim {

namespace {

TissueAcoustics entry_from_json(const nlohmann::json& j, const TissueAcoustics& base) {
  if (!j.is_object()) throw ConfigError("acoustic table entry must be an object");
  TissueAcoustics t = base;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ConfigError("acoustic table field '" + key + "' must be a number");
    const double v = value.get<double>();
    if (key == "impedance_scale") t.impedance_scale = v;
    else if (key == "attenuation") t.attenuation = v;
    else if (key == "sigma0") t.sigma0 = v;
    else if (key == "mu0") t.mu0 = v;
    else if (key == "mu1") t.mu1 = v;
    else throw ConfigError("unknown acoustic table field '" + key + "'");
  }
  return t;
}

nlohmann::json entry_to_json(const TissueAcoustics& t) {
  return {{"impedance_scale", t.impedance_scale},
          {"attenuation", t.attenuation},
          {"sigma0", t.sigma0},
          {"mu0", t.mu0},
          {"mu1", t.mu1}};
}

void check_entry(const TissueAcoustics& t, const std::string& what) {
  if (!(t.attenuation >= 0.0)) throw ConfigError(what + ": attenuation must be >= 0");
  if (!(t.sigma0 >= 0.0)) throw ConfigError(what + ": sigma0 must be >= 0");
  if (!(t.mu1 >= 0.0 && t.mu1 <= 1.0)) throw ConfigError(what + ": mu1 must lie in [0, 1]");
  if (!(t.impedance_scale > 0.0)) throw ConfigError(what + ": impedance_scale must be > 0");
  if (!std::isfinite(t.mu0)) throw ConfigError(what + ": mu0 must be finite");
}

}  // namespace

AcousticTable AcousticTable::defaults() {
  AcousticTable t;
  t.entries[tissue::background] = {1.0, 0.0, 0.0, 0.0, 0.0};
  t.entries[tissue::skin] = {1.0, 0.006, 0.010, 0.012, 0.6};
  t.entries[tissue::fat] = {1.0, 0.004, 0.006, 0.008, 0.5};
  t.entries[tissue::muscle] = {1.0, 0.005, 0.012, 0.015, 0.7};
  t.entries[tissue::bone] = {2.0, 0.3, 0.003, 0.003, 0.0};
  t.fallback = {1.0, 0.005, 0.010, 0.012, 0.6};
  return t;
}

AcousticTable AcousticTable::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("acoustic table must be a JSON object");
  AcousticTable t;
  t.fallback = defaults().fallback;
  for (const auto& [key, value] : j.items()) {
    if (key == "ct_floor" || key == "epsilon" || key == "z_offset") {
      if (!value.is_number()) throw ConfigError("acoustic table '" + key + "' must be a number");
      (key == "ct_floor" ? t.ct_floor : key == "epsilon" ? t.epsilon : t.z_offset) = value.get<double>();
    } else if (key == "fallback") {
      t.fallback = entry_from_json(value, t.fallback);
    } else if (key == "labels") {
      if (!value.is_object()) throw ConfigError("acoustic table 'labels' must be an object");
      for (const auto& [id, entry] : value.items()) {
        std::size_t used = 0;
        long parsed = -1;
        try {
          parsed = std::stol(id, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != id.size() || parsed < 0 || parsed > 65535) {
          throw ConfigError("acoustic table label id '" + id + "' is not an integer in [0, 65535]");
        }
        t.entries[static_cast<Label>(parsed)] = entry_from_json(entry, TissueAcoustics{});
      }
    } else {
      throw ConfigError("unknown acoustic table key '" + key + "'");
    }
  }
  t.validate();
  return t;
}

AcousticTable AcousticTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open acoustic table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("acoustic table " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json AcousticTable::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [id, entry] : entries) labels[std::to_string(id)] = entry_to_json(entry);
  return {{"ct_floor", ct_floor},
          {"epsilon", epsilon},
          {"z_offset", z_offset},
          {"fallback", entry_to_json(fallback)},
          {"labels", labels}};
}

const TissueAcoustics& AcousticTable::at(Label l) const {
  const auto it = entries.find(l);
  return it == entries.end() ? fallback : it->second;
}

void AcousticTable::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("acoustic table: epsilon must be > 0");
  if (!std::isfinite(ct_floor) || !std::isfinite(z_offset)) throw ConfigError("acoustic table: non-finite offsets");
  if (z_offset < 0.0) throw ConfigError("acoustic table: z_offset must be >= 0 to keep Z positive");
  check_entry(fallback, "fallback");
  for (const auto& [id, entry] : entries) check_entry(entry, "label " + std::to_string(id));
}

std::vector<Label> AcousticTable::report_missing(const Volume& labels) const {
  std::set<Label> present(labels.labels.begin(), labels.labels.end());
  std::vector<Label> missing;
  for (Label l : present) {
    if (!has(l)) missing.push_back(l);
  }
  static std::mutex mutex;
  static std::set<Label> reported;
  std::lock_guard lock(mutex);
  for (Label l : missing) {
    if (reported.insert(l).second) {
      std::clog << "echosim: label " << l << " has no acoustic entry, using the soft-tissue fallback\n";
    }
  }
  return missing;
}

void UsParams::validate() const {
  if (!(frequency_mhz > 0.0)) throw ConfigError("us params: frequency must be > 0");
  if (!(initial_energy > 0.0)) throw ConfigError("us params: initial energy must be > 0");
  if (!(psf_sigma_lateral >= 0.0) || !(psf_sigma_axial >= 0.0)) throw ConfigError("us params: psf sigma must be >= 0");
  if (!(psf_truncate > 0.0)) throw ConfigError("us params: psf truncation must be > 0");
  if (!(transition_sigma_px >= 0.0)) throw ConfigError("us params: transition sigma must be >= 0");
  if (!(gain > 0.0) || !(gamma > 0.0)) throw ConfigError("us params: gain and gamma must be > 0");
  if (octave_scales.empty() || octave_scales.size() != octave_weights.size()) {
    throw ConfigError("us params: octave scales and weights must be non-empty and of equal length");
  }
  for (double s : octave_scales) {
    if (!(s > 0.0)) throw ConfigError("us params: octave scales must be > 0");
  }
  if (!(noise_spacing_mm >= 0.0)) throw ConfigError("us params: noise spacing must be >= 0");
}

UsParams UsParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("us params must be a JSON object");
  UsParams p;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "frequency_mhz") p.frequency_mhz = value.get<double>();
      else if (key == "initial_energy") p.initial_energy = value.get<double>();
      else if (key == "psf_sigma_lateral") p.psf_sigma_lateral = value.get<double>();
      else if (key == "psf_sigma_axial") p.psf_sigma_axial = value.get<double>();
      else if (key == "psf_truncate") p.psf_truncate = value.get<double>();
      else if (key == "transition_sigma_px") p.transition_sigma_px = value.get<double>();
      else if (key == "gain") p.gain = value.get<double>();
      else if (key == "gamma") p.gamma = value.get<double>();
      else if (key == "octave_scales") p.octave_scales = value.get<std::vector<double>>();
      else if (key == "octave_weights") p.octave_weights = value.get<std::vector<double>>();
      else if (key == "noise_spacing_mm") p.noise_spacing_mm = value.get<double>();
      else throw ConfigError("unknown us params key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("us params '" + key + "': " + e.what());
    }
  }
  p.validate();
  return p;
}

nlohmann::json UsParams::to_json() const {
  return {{"frequency_mhz", frequency_mhz},
          {"initial_energy", initial_energy},
          {"psf_sigma_lateral", psf_sigma_lateral},
          {"psf_sigma_axial", psf_sigma_axial},
          {"psf_truncate", psf_truncate},
          {"transition_sigma_px", transition_sigma_px},
          {"gain", gain},
          {"gamma", gamma},
          {"octave_scales", octave_scales},
          {"octave_weights", octave_weights},
          {"noise_spacing_mm", noise_spacing_mm}};
}

}  // namespace echosim
