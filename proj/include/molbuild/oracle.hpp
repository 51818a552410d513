#pragma once

#include <map>
#include <set>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace molbuild {

struct GammaPair {
  std::string solute;
  std::string solvent;
  double temperature = 298.0;
};

/// Client side of the activity-coefficient oracle protocol. One request line
///   {"id": u64, "pairs": [[solute, solvent, T], ...]}
/// is answered by one response line
///   {"id": u64, "ln_gamma_inf": [number|null, ...]}
class OracleClient {
 public:
  virtual ~OracleClient() = default;
  /// ln gamma-infinity per pair; nullopt where the oracle returned null.
  virtual std::vector<std::optional<double>> ln_gamma(const std::vector<GammaPair>& pairs) = 0;
};

/// Shared protocol logic over a pair of file descriptors.
class LineOracle : public OracleClient {
 public:
  std::vector<std::optional<double>> ln_gamma(const std::vector<GammaPair>& pairs) override;
  std::uint64_t requests() const noexcept { return next_id_; }

 protected:
  LineOracle(int read_fd, int write_fd, int timeout_ms)
      : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(timeout_ms) {}
  void write_line(const std::string& line);
  std::string read_line();

  int read_fd_;
  int write_fd_;
  int timeout_ms_;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
  bool socket_ = false;
};

/// Runs `command` through /bin/sh and talks over its stdin/stdout.
class ProcessOracle : public LineOracle {
 public:
  ProcessOracle(const std::string& command, int timeout_ms);
  ~ProcessOracle() override;
  ProcessOracle(const ProcessOracle&) = delete;
  ProcessOracle& operator=(const ProcessOracle&) = delete;

 private:
  int pid_ = -1;
};

class TcpOracle : public LineOracle {
 public:
  TcpOracle(const std::string& host, int port, int timeout_ms);
  ~TcpOracle() override;
  TcpOracle(const TcpOracle&) = delete;
  TcpOracle& operator=(const TcpOracle&) = delete;
};

/// Memoises answers by (solute, solvent, temperature) and converts them to
/// gamma; only unseen pairs are sent, in a single request.
class GammaCache {
 public:
  explicit GammaCache(std::shared_ptr<OracleClient> client) : client_(std::move(client)) {}

  std::vector<std::optional<double>> gamma(const std::vector<GammaPair>& pairs);
  std::size_t size() const noexcept { return cache_.size(); }

 private:
  std::shared_ptr<OracleClient> client_;
  std::map<std::tuple<std::string, std::string, double>, std::optional<double>> cache_;
};

/// Oracle configuration block: {"command": "..."} or {"tcp": "host:port"},
/// plus optional "timeout_ms". The MOLBUILD_ORACLE_CMD environment variable,
/// when set, replaces the command.
std::shared_ptr<OracleClient> connect_oracle(const nlohmann::json& config);

}  // namespace molbuild
