// Stand-in external model for exercising the predictor wire protocol.
//
//   protocol_stub <mode>
//
// uniform       [1/3, 1/3, 1/3]
// band3         class 0 = share of energy in band 3 of 8, class 1 = the rest
// echo          [sample_rate, n_samples, first sample]
// reverse       echo, but answers each burst of requests in reverse order
// extra-fields  uniform with unknown fields added to every message
// wrong-length  four values for three classes
// unknown-id    answers request N as N + 1000
// garbage       a non-JSON line
// reject        an error message for every request
// silent        reads requests and never answers
// crash         exits on the first request
// no-hello      exits without a handshake
// bad-hello     a handshake without labels

#include <poll.h>
#include <unistd.h>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bandlime/external_predictor.hpp"
#include "bandlime/spectral.hpp"

using nlohmann::json;

namespace {

bool input_pending(int timeout_ms) {
  if (std::cin.rdbuf()->in_avail() > 0) return true;
  pollfd p{0, POLLIN, 0};
  return ::poll(&p, 1, timeout_ms) > 0;
}

json answer(const std::string& mode, const json& req) {
  const auto id = req.at("id").get<std::uint64_t>();
  if (mode == "reject") return {{"type", "error"}, {"id", id}, {"message", "refused"}};
  if (mode == "unknown-id") return {{"type", "prediction"}, {"id", id + 1000}, {"probs", {0.2, 0.3, 0.5}}};

  std::vector<double> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const auto samples = bandlime::decode_samples_b64(req.at("samples_b64").get<std::string>());
  const int sr = req.at("sample_rate").get<int>();
  if (mode == "band3") {
    const bandlime::StftParams p{};
    const auto e = bandlime::band_energies(bandlime::stft(bandlime::AudioClip(samples, sr), p),
                                           bandlime::BandLayout(p.n_bins(), 8));
    double total = 0.0;
    for (double v : e) total += v;
    const double share = total > 0.0 ? e[3] / total : 0.0;
    probs = {share, 1.0 - share, 0.0};
  } else if (mode == "echo" || mode == "reverse") {
    probs = {static_cast<double>(sr), static_cast<double>(samples.size()),
             samples.empty() ? 0.0 : samples[0]};
  } else if (mode == "wrong-length") {
    probs.push_back(0.0);
  }
  json out = {{"type", "prediction"}, {"id", id}, {"probs", probs}};
  if (mode == "extra-fields") out["latency_ms"] = 3;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "uniform";
  if (mode == "no-hello") return 0;
  json hello = {{"type", "hello"}, {"n_classes", 3}, {"labels", {"neutral", "happy", "sad"}}};
  if (mode == "bad-hello") hello.erase("labels");
  if (mode == "extra-fields") hello["model"] = "stub";
  std::cout << hello.dump() << std::endl;

  std::vector<json> held;
  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line);
    if (req.at("type") == "bye") break;
    if (mode == "crash") return 3;
    if (mode == "silent") continue;
    if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (mode == "reverse") {
      held.push_back(answer(mode, req));
      if (input_pending(50)) continue;
      for (auto it = held.rbegin(); it != held.rend(); ++it) std::cout << it->dump() << "\n";
      std::cout.flush();
      held.clear();
      continue;
    }
    std::cout << answer(mode, req).dump() << std::endl;
  }
  return 0;
}
