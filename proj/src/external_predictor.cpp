#include "bandlime/external_predictor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "bandlime/error.hpp"

extern char** environ;

namespace bandlime {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
    return t;
  }();
  if (text.size() % 4 != 0) throw InvalidArgument("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && last && j >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int s = table[static_cast<unsigned char>(c)];
      if (s < 0 || pad > 0) throw InvalidArgument("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(s);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return static_cast<int>(std::clamp<long long>(left.count(), 0, 1 << 30));
}

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

std::string encode_samples_b64(std::span<const float> samples) {
  static_assert(std::endian::native == std::endian::little);
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(samples.data());
  return base64_encode({bytes, samples.size() * sizeof(float)});
}

std::vector<float> decode_samples_b64(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % sizeof(float) != 0) {
    throw InvalidArgument("decoded sample payload is not a whole number of float32 values");
  }
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

ExternalPredictor::ExternalPredictor(std::string command)
    : ExternalPredictor(std::move(command), Options{}) {}

ExternalPredictor::ExternalPredictor(std::string command, Options options)
    : command_(std::move(command)), options_(options) {
  if (options_.max_in_flight == 0) throw InvalidArgument("max_in_flight must be positive");

  // A child that dies mid-write would otherwise kill us with SIGPIPE; we
  // report EPIPE as a predictor failure instead.
  static std::once_flag ignore_sigpipe;
  std::call_once(ignore_sigpipe, [] { ::signal(SIGPIPE, SIG_IGN); });

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw SpawnError("pipe failed: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw SpawnError("pipe failed: " + std::string(std::strerror(errno)));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::string sh = "/bin/sh";
  std::string flag = "-c";
  char* argv[] = {sh.data(), flag.data(), command_.data(), nullptr};
  const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw SpawnError("cannot spawn '" + command_ + "': " + std::strerror(rc));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  set_nonblocking(to_child_);
  set_nonblocking(from_child_);

  try {
    std::string line;
    try {
      line = read_line(Clock::now() + options_.timeout);
    } catch (const PredictorTimeout&) {
      throw PredictorTimeout("no handshake from '" + command_ + "' within the timeout");
    } catch (const PredictorError& e) {
      throw SpawnError("'" + command_ + "' exited before the handshake: " + e.what());
    }
    json hello;
    try {
      hello = json::parse(line);
    } catch (const json::exception&) {
      throw ProtocolError("malformed handshake line: " + line);
    }
    if (!hello.is_object() || hello.value("type", "") != "hello") {
      throw ProtocolError("first line must be a hello message");
    }
    const auto k = hello.find("n_classes");
    const auto labels = hello.find("labels");
    if (k == hello.end() || !k->is_number_unsigned() || k->get<std::size_t>() == 0) {
      throw ProtocolError("hello must carry a positive integer n_classes");
    }
    if (labels == hello.end() || !labels->is_array() || labels->size() != k->get<std::size_t>()) {
      throw ProtocolError("hello labels must be an array of n_classes strings");
    }
    for (const auto& l : *labels) {
      if (!l.is_string()) throw ProtocolError("hello labels must be strings");
      labels_.push_back(l.get<std::string>());
    }
  } catch (...) {
    shutdown();
    throw;
  }
}

ExternalPredictor::~ExternalPredictor() { shutdown(); }

void ExternalPredictor::shutdown() {
  if (to_child_ >= 0) {
    const std::string bye = "{\"type\":\"bye\"}\n";
    [[maybe_unused]] auto n = ::write(to_child_, bye.data(), bye.size());
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    const auto give_up = Clock::now() + std::chrono::seconds(2);
    while (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() > give_up) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
  }
}

std::string ExternalPredictor::read_line(Clock::time_point deadline) {
  for (;;) {
    const auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) throw PredictorTimeout("timed out waiting for the predictor process");
    char chunk[65536];
    const ssize_t got = ::read(from_child_, chunk, sizeof chunk);
    if (got > 0) {
      read_buffer_.append(chunk, static_cast<std::size_t>(got));
    } else if (got == 0) {
      throw PredictorError("predictor process closed its output");
    } else if (errno != EAGAIN && errno != EINTR) {
      throw PredictorError("read from predictor failed: " + std::string(std::strerror(errno)));
    }
  }
}

Eigen::MatrixXd ExternalPredictor::predict(std::span<const AudioClip> clips) {
  if (pid_ <= 0) throw PredictorError("predictor process is not running");
  const std::size_t k = labels_.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(clips.size()), static_cast<Eigen::Index>(k));

  struct InFlight {
    std::size_t index;
    Clock::time_point deadline;
  };
  std::map<std::uint64_t, InFlight> in_flight;
  std::size_t next_index = 0;
  std::size_t answered = 0;

  std::string outgoing;
  std::size_t written = 0;
  std::uint64_t sending_id = 0;
  std::size_t sending_index = 0;
  Clock::time_point write_deadline{};

  // Any failure leaves the conversation in an unknown state.
  auto fail = [&](auto&& error) {
    shutdown();
    throw error;
  };

  while (answered < clips.size()) {
    if (outgoing.empty() && next_index < clips.size() && in_flight.size() < options_.max_in_flight) {
      const AudioClip& clip = clips[next_index];
      sending_id = next_id_++;
      sending_index = next_index++;
      json request = {{"type", "predict"},
                      {"id", sending_id},
                      {"sample_rate", clip.sample_rate_hz()},
                      {"samples_b64", encode_samples_b64(clip.samples())}};
      outgoing = request.dump() + "\n";
      written = 0;
      write_deadline = Clock::now() + options_.timeout;
    }

    Clock::time_point deadline = Clock::time_point::max();
    std::optional<std::uint64_t> deadline_id;
    for (const auto& [id, f] : in_flight) {
      if (f.deadline < deadline) {
        deadline = f.deadline;
        deadline_id = id;
      }
    }
    if (!outgoing.empty() && write_deadline < deadline) {
      deadline = write_deadline;
      deadline_id = sending_id;
    }

    std::array<pollfd, 2> fds{pollfd{from_child_, POLLIN, 0},
                              pollfd{to_child_, static_cast<short>(outgoing.empty() ? 0 : POLLOUT), 0}};
    const int ready = ::poll(fds.data(), outgoing.empty() ? 1 : 2, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(PredictorError("poll failed: " + std::string(std::strerror(errno))));
    }
    if (ready == 0) {
      const std::size_t index =
          deadline_id == sending_id && !outgoing.empty() ? sending_index : in_flight[*deadline_id].index;
      fail(PredictorTimeout("request " + std::to_string(*deadline_id) + " timed out", index));
    }

    if (!outgoing.empty() && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = ::write(to_child_, outgoing.data() + written, outgoing.size() - written);
      if (n > 0) {
        written += static_cast<std::size_t>(n);
        if (written == outgoing.size()) {
          in_flight[sending_id] = {sending_index, Clock::now() + options_.timeout};
          outgoing.clear();
        }
      } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
        fail(PredictorError("write to predictor failed: " + std::string(std::strerror(errno)),
                            sending_index));
      }
    }

    if (fds[0].revents & (POLLIN | POLLERR | POLLHUP)) {
      char chunk[65536];
      const ssize_t got = ::read(from_child_, chunk, sizeof chunk);
      if (got == 0) fail(PredictorError("predictor process closed its output"));
      if (got < 0 && errno != EAGAIN && errno != EINTR) {
        fail(PredictorError("read from predictor failed: " + std::string(std::strerror(errno))));
      }
      if (got > 0) read_buffer_.append(chunk, static_cast<std::size_t>(got));
    }

    for (auto nl = read_buffer_.find('\n'); nl != std::string::npos; nl = read_buffer_.find('\n')) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      if (line.empty()) continue;

      json msg;
      try {
        msg = json::parse(line);
      } catch (const json::exception&) {
        fail(ProtocolError("malformed line from predictor: " + line.substr(0, 200)));
      }
      if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
        fail(ProtocolError("predictor message without a type: " + line.substr(0, 200)));
      }
      const auto type = msg["type"].get<std::string>();
      if (type != "prediction" && type != "error") {
        fail(ProtocolError("unexpected message type '" + type + "'"));
      }
      if (!msg.contains("id") || !msg["id"].is_number_unsigned()) {
        fail(ProtocolError("predictor " + type + " without an unsigned integer id"));
      }
      const auto id = msg["id"].get<std::uint64_t>();
      const auto it = in_flight.find(id);
      if (it == in_flight.end()) {
        fail(ProtocolError("response for unknown request id " + std::to_string(id), id));
      }
      const std::size_t index = it->second.index;
      if (type == "error") {
        const std::string detail = msg.value("message", std::string("no detail"));
        fail(ProtocolError("predictor rejected request " + std::to_string(id) + ": " + detail, id, index));
      }
      const auto probs = msg.find("probs");
      if (probs == msg.end() || !probs->is_array() || probs->size() != k) {
        const std::size_t got = probs != msg.end() && probs->is_array() ? probs->size() : 0;
        fail(ProtocolError("request " + std::to_string(id) + ": expected " + std::to_string(k) +
                               " probabilities, got " + std::to_string(got),
                           id, index));
      }
      for (std::size_t c = 0; c < k; ++c) {
        const auto& v = (*probs)[c];
        if (!v.is_number()) {
          fail(ProtocolError("request " + std::to_string(id) + ": non-numeric probability", id, index));
        }
        out(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(c)) = v.get<double>();
      }
      in_flight.erase(it);
      ++answered;
    }
  }
  return out;
}

}  // namespace bandlime
