// Line-protocol activity-coefficient stand-in used by the tests.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <thread>

#include "molbuild/smiles.hpp"

namespace {

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string temperature_key(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mock oracle"};
  std::string fixture;
  double constant = 0.0;
  bool use_constant = false;
  int delay_ms = 0;
  std::string fault;
  int fault_after = 0;
  app.add_option("--fixture", fixture, "JSON map \"solute|solvent|T\" -> ln gamma");
  app.add_option("--constant", constant, "Answer this ln gamma for every pair")->each([&](const std::string&) { use_constant = true; });
  app.add_option("--delay-ms", delay_ms, "Sleep before each answer");
  app.add_option("--fault", fault, "wrong-id | garbage | short | error | exit");
  app.add_option("--fault-after", fault_after, "Requests answered correctly before the fault");
  CLI11_PARSE(app, argc, argv);

  nlohmann::json table = nlohmann::json::object();
  if (!fixture.empty()) {
    std::ifstream in(fixture);
    table = nlohmann::json::parse(in);
  }
  const molbuild::Alphabet alphabet = molbuild::Alphabet::drug_full();
  int served = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    nlohmann::json request;
    try {
      request = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      std::cout << nlohmann::json{{"id", nullptr}, {"error", "malformed request"}}.dump() << std::endl;
      continue;
    }
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    const std::uint64_t id = request.contains("id") && request["id"].is_number_unsigned() ? request["id"].get<std::uint64_t>() : 0;
    if (!fault.empty() && served >= fault_after) {
      if (fault == "exit") return 0;
      if (fault == "garbage") {
        std::cout << "not json at all" << std::endl;
        continue;
      }
      if (fault == "wrong-id") {
        std::cout << nlohmann::json{{"id", id + 1}, {"ln_gamma_inf", nlohmann::json::array()}}.dump() << std::endl;
        continue;
      }
      if (fault == "error") {
        std::cout << nlohmann::json{{"id", id}, {"error", "injected"}}.dump() << std::endl;
        continue;
      }
    }
    nlohmann::json values = nlohmann::json::array();
    if (!request.contains("pairs") || !request["pairs"].is_array()) {
      std::cout << nlohmann::json{{"id", id}, {"error", "missing pairs"}}.dump() << std::endl;
      continue;
    }
    try {
      for (const auto& pair : request["pairs"]) {
        const auto solute = pair.at(0).get<std::string>();
        const auto solvent = pair.at(1).get<std::string>();
        const double t = pair.at(2).get<double>();
        const std::string key = solute + "|" + solvent + "|" + temperature_key(t);
        if (!table.empty()) {
          values.push_back(table.contains(key) ? table[key] : nlohmann::json(nullptr));
          continue;
        }
        try {
          molbuild::parse_smiles(solute, alphabet);
          molbuild::parse_smiles(solvent, alphabet);
        } catch (const molbuild::Error&) {
          values.push_back(nullptr);
          continue;
        }
        if (use_constant) {
          values.push_back(constant);
        } else {
          // Integer hash into [-2, 12] in steps of 1/1024.
          const std::uint64_t h = fnv(key) % (14 * 1024 + 1);
          values.push_back(-2.0 + static_cast<double>(h) / 1024.0);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      std::cout << nlohmann::json{{"id", id}, {"error", e.what()}}.dump() << std::endl;
      continue;
    }
    if (!fault.empty() && fault == "short" && served >= fault_after && !values.empty()) values.erase(values.size() - 1);
    std::cout << nlohmann::json{{"id", id}, {"ln_gamma_inf", values}}.dump() << std::endl;
    ++served;
  }
  return 0;
}
