#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bsmd/privacy.hpp"

namespace bsmd {

struct DemoCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct DemoReport {
  std::string demo;
  std::vector<DemoCheck> checks;
  std::vector<std::string> log;
  std::map<std::string, std::string> values;  // headline numbers, sorted by key

  bool passed() const;
};

using DemoLog = std::function<void(const std::string&)>;

struct DemoOptions {
  std::uint64_t seed = 1;
  std::size_t active_nodes = 4;
  std::size_t faulty = 0;
  std::int64_t timeout_ms = 500;
  std::size_t frames = 1000;     // interception
  std::size_t transfers = 20;    // broker, revocation
  std::size_t samples = 1000;    // privacy
  std::size_t trials = 100;      // revocation: attempts per lifecycle state
  double fee = 0.10;             // broker
  privacy::PrivacyPolicy policy;
};

// Proof-less and forged-attribute connection attempts against the two-step
// credential check.
DemoReport run_spoofing_demo(const DemoOptions& options, const DemoLog& log = {});
// Taps every frame on the wire and attacks it without the channel secret.
DemoReport run_interception_demo(const DemoOptions& options, const DemoLog& log = {});
// Contract lifecycle enumeration plus DID revocation on a live channel.
DemoReport run_revocation_demo(const DemoOptions& options, const DemoLog& log = {});
// Brokered University/Individual arrangement with fee accounting.
DemoReport run_broker_demo(const DemoOptions& options, const DemoLog& log = {});

struct PrivacySample {
  std::size_t id = 0;
  double dx = 0.0;
  double dy = 0.0;
  double d = 0.0;
};

struct PrivacyDemo {
  DemoReport report;
  std::vector<PrivacySample> geomask;
  std::vector<PrivacySample> geoind;
};

PrivacyDemo run_privacy_demo(const DemoOptions& options, const DemoLog& log = {});

// Columns: sample_id,dx,dy,d
void write_privacy_csv(const std::string& path, const std::vector<PrivacySample>& samples);

}  // namespace bsmd
