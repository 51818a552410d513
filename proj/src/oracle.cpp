#include "molbuild/oracle.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "molbuild/error.hpp"

namespace molbuild {

void LineOracle::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t wrote = socket_ ? ::send(write_fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL)
                                  : ::write(write_fd_, data.data() + done, data.size() - done);
    if (wrote < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::OracleUnreachable, std::string("write to oracle failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(wrote);
  }
}

std::string LineOracle::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (left <= 0) throw Error(ErrorKind::OracleTimeout, "no response within " + std::to_string(timeout_ms_) + " ms");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::OracleUnreachable, std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    const ssize_t got = ::read(read_fd_, chunk, sizeof chunk);
    if (got < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw Error(ErrorKind::OracleUnreachable, std::string("read from oracle failed: ") + std::strerror(errno));
    }
    if (got == 0) throw Error(ErrorKind::OracleUnreachable, "oracle closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

std::vector<std::optional<double>> LineOracle::ln_gamma(const std::vector<GammaPair>& pairs) {
  if (pairs.empty()) return {};
  const std::uint64_t id = next_id_++;
  nlohmann::json request;
  request["id"] = id;
  auto& list = request["pairs"] = nlohmann::json::array();
  for (const auto& p : pairs) {
    if (!(p.temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
    list.push_back({p.solute, p.solvent, p.temperature});
  }
  write_line(request.dump());
  const std::string line = read_line();
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::ProtocolError, "response is not JSON: " + line.substr(0, 200));
  }
  if (!response.is_object() || !response.contains("id") || !response["id"].is_number_unsigned() ||
      response["id"].get<std::uint64_t>() != id)
    throw Error(ErrorKind::ProtocolError, "response id does not match request " + std::to_string(id));
  if (response.contains("error"))
    throw Error(ErrorKind::ProtocolError, "oracle reported: " + response["error"].dump());
  if (!response.contains("ln_gamma_inf") || !response["ln_gamma_inf"].is_array() ||
      response["ln_gamma_inf"].size() != pairs.size())
    throw Error(ErrorKind::ProtocolError, "ln_gamma_inf missing or of wrong length");
  std::vector<std::optional<double>> out;
  out.reserve(pairs.size());
  for (const auto& v : response["ln_gamma_inf"]) {
    if (v.is_null()) {
      out.emplace_back();
    } else if (v.is_number()) {
      out.emplace_back(v.get<double>());
    } else {
      throw Error(ErrorKind::ProtocolError, "ln_gamma_inf entries must be numbers or null");
    }
  }
  return out;
}

ProcessOracle::ProcessOracle(const std::string& command, int timeout_ms) : LineOracle(-1, -1, timeout_ms) {
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw Error(ErrorKind::OracleUnreachable, std::string("pipe failed: ") + std::strerror(errno));
  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorKind::OracleUnreachable, std::string("fork failed: ") + std::strerror(errno));
  if (pid_ == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
  ::fcntl(write_fd_, F_SETFD, FD_CLOEXEC);
  ::fcntl(read_fd_, F_SETFD, FD_CLOEXEC);
}

ProcessOracle::~ProcessOracle() {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }
}

TcpOracle::TcpOracle(const std::string& host, int port, int timeout_ms) : LineOracle(-1, -1, timeout_ms) {
  socket_ = true;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found) != 0 || !found)
    throw Error(ErrorKind::OracleUnreachable, "cannot resolve " + host);
  int fd = -1;
  for (addrinfo* a = found; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw Error(ErrorKind::OracleUnreachable, "cannot connect to " + host + ":" + std::to_string(port));
  read_fd_ = write_fd_ = fd;
}

TcpOracle::~TcpOracle() {
  if (read_fd_ >= 0) ::close(read_fd_);
}

std::vector<std::optional<double>> GammaCache::gamma(const std::vector<GammaPair>& pairs) {
  std::vector<GammaPair> missing;
  std::set<std::tuple<std::string, std::string, double>> queued;
  for (const auto& p : pairs) {
    auto key = std::make_tuple(p.solute, p.solvent, p.temperature);
    if (!cache_.count(key) && queued.insert(key).second) missing.push_back(p);
  }
  if (!missing.empty()) {
    const auto values = client_->ln_gamma(missing);
    for (std::size_t i = 0; i < missing.size(); ++i)
      cache_[std::make_tuple(missing[i].solute, missing[i].solvent, missing[i].temperature)] = values[i];
  }
  std::vector<std::optional<double>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto& v = cache_.at(std::make_tuple(p.solute, p.solvent, p.temperature));
    out.push_back(v ? std::optional<double>(std::exp(*v)) : std::nullopt);
  }
  return out;
}

std::shared_ptr<OracleClient> connect_oracle(const nlohmann::json& config) {
  if (!config.is_object()) throw Error(ErrorKind::ConfigError, "oracle must be an object");
  int timeout_ms = 30000;
  std::string command;
  std::string tcp;
  for (const auto& [key, value] : config.items()) {
    if (key == "timeout_ms") timeout_ms = value.get<int>();
    else if (key == "command") command = value.get<std::string>();
    else if (key == "tcp") tcp = value.get<std::string>();
    else throw Error(ErrorKind::ConfigError, "unknown oracle key '" + key + "'");
  }
  if (const char* env = std::getenv("MOLBUILD_ORACLE_CMD"); env && *env) {
    command = env;
    tcp.clear();
  }
  if (timeout_ms <= 0) throw Error(ErrorKind::ConfigError, "oracle.timeout_ms must be positive");
  if (!tcp.empty()) {
    const auto colon = tcp.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorKind::ConfigError, "oracle.tcp must be host:port");
    return std::make_shared<TcpOracle>(tcp.substr(0, colon), std::stoi(tcp.substr(colon + 1)), timeout_ms);
  }
  if (command.empty()) throw Error(ErrorKind::ConfigError, "oracle needs a command or a tcp address");
  return std::make_shared<ProcessOracle>(command, timeout_ms);
}

}  // namespace molbuild
