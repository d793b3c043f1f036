#pragma once

// Child processes with piped standard streams, each in its own process
// group so that the whole group can be torn down on every exit path.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "bag/error.hpp"

namespace bag {

using Clock = std::chrono::steady_clock;

namespace detail {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::pair<Fd, Fd> make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) fail(errc::spawn_failure, std::string("pipe2: ") + std::strerror(errno));
  return {Fd(fds[0]), Fd(fds[1])};
}

inline void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

inline int poll_timeout_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  if (left <= 0) return 0;
  return static_cast<int>(std::min<long long>(left, 1000));
}

}  // namespace detail

struct ExitInfo {
  bool exited = false;  // normal exit, else killed by a signal
  int code = 0;         // exit code or signal number
  double cpu_seconds = 0.0;
};

class ChildProcess {
 public:
  enum class ReadResult { line, eof, timeout };

  /// Starts argv[0] (PATH lookup) in a new process group. Fails with
  /// SpawnFailure if the executable cannot be started at all.
  static ChildProcess spawn(const std::vector<std::string>& argv,
                            const std::optional<std::string>& working_dir = std::nullopt) {
    if (argv.empty()) fail(errc::spawn_failure, "empty command");
    detail::ignore_sigpipe();
    auto [in_r, in_w] = detail::make_pipe();
    auto [out_r, out_w] = detail::make_pipe();
    auto [err_r, err_w] = detail::make_pipe();
    auto [exec_r, exec_w] = detail::make_pipe();

    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    const char* cwd = working_dir ? working_dir->c_str() : nullptr;

    const pid_t pid = ::fork();
    if (pid < 0) fail(errc::spawn_failure, std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      // Only async-signal-safe calls until exec.
      ::setpgid(0, 0);
      ::signal(SIGPIPE, SIG_DFL);
      ::dup2(in_r.get(), STDIN_FILENO);
      ::dup2(out_w.get(), STDOUT_FILENO);
      ::dup2(err_w.get(), STDERR_FILENO);
      if (cwd && ::chdir(cwd) != 0) {
        const int e = errno;
        [[maybe_unused]] auto n = ::write(exec_w.get(), &e, sizeof e);
        ::_exit(127);
      }
      ::execvp(cargv[0], cargv.data());
      const int e = errno;
      [[maybe_unused]] auto n = ::write(exec_w.get(), &e, sizeof e);
      ::_exit(127);
    }
    ::setpgid(pid, pid);  // also done in the child; whichever runs first wins

    ChildProcess child;
    child.pid_ = pid;
    child.stdin_ = std::move(in_w);
    child.stdout_ = std::move(out_r);
    child.stderr_ = std::move(err_r);
    in_r.reset();
    out_w.reset();
    err_w.reset();
    exec_w.reset();

    int child_errno = 0;
    ssize_t n;
    do {
      n = ::read(exec_r.get(), &child_errno, sizeof child_errno);
    } while (n < 0 && errno == EINTR);
    if (n > 0) {
      child.terminate();
      fail(errc::spawn_failure, "cannot execute '" + argv[0] + "': " + std::strerror(child_errno));
    }
    ::fcntl(child.stdout_.get(), F_SETFL, O_NONBLOCK);
    ::fcntl(child.stderr_.get(), F_SETFL, O_NONBLOCK);
    return child;
  }

  ChildProcess() = default;
  ChildProcess(ChildProcess&& o) noexcept { *this = std::move(o); }
  ChildProcess& operator=(ChildProcess&& o) noexcept {
    if (this != &o) {
      terminate();
      pid_ = std::exchange(o.pid_, -1);
      stdin_ = std::move(o.stdin_);
      stdout_ = std::move(o.stdout_);
      stderr_ = std::move(o.stderr_);
      out_buf_ = std::move(o.out_buf_);
      err_tail_ = std::move(o.err_tail_);
      out_eof_ = o.out_eof_;
      exit_ = o.exit_;
    }
    return *this;
  }
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess() { terminate(); }

  pid_t pid() const noexcept { return pid_; }

  /// False when the child closed its end of the pipe.
  bool write_all(std::string_view data) {
    if (!stdin_) return false;
    while (!data.empty()) {
      const ssize_t n = ::write(stdin_.get(), data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  bool write_line(std::string_view line) {
    std::string buf(line);
    buf.push_back('\n');
    return write_all(buf);
  }

  void close_stdin() { stdin_.reset(); }

  /// Reads one '\n'-terminated line (without the newline). Lines longer
  /// than `max_line` are returned truncated so a runaway child cannot
  /// exhaust memory.
  ReadResult read_line(std::string& line, Clock::time_point deadline, std::size_t max_line = 64 << 20) {
    for (;;) {
      if (auto pos = out_buf_.find('\n'); pos != std::string::npos) {
        line.assign(out_buf_, 0, pos);
        out_buf_.erase(0, pos + 1);
        return ReadResult::line;
      }
      if (out_buf_.size() > max_line) {
        line = std::move(out_buf_);
        out_buf_.clear();
        return ReadResult::line;
      }
      if (out_eof_) {
        if (!out_buf_.empty()) {
          line = std::move(out_buf_);
          out_buf_.clear();
          return ReadResult::line;
        }
        return ReadResult::eof;
      }
      if (Clock::now() >= deadline) return ReadResult::timeout;
      pump(detail::poll_timeout_ms(deadline));
    }
  }

  /// Reads stdout to EOF (or until the deadline).
  std::optional<std::string> read_all(Clock::time_point deadline) {
    while (!out_eof_) {
      if (Clock::now() >= deadline) return std::nullopt;
      pump(detail::poll_timeout_ms(deadline));
    }
    return std::exchange(out_buf_, {});
  }

  /// Waits for the child to exit by itself until the deadline.
  std::optional<ExitInfo> wait_until(Clock::time_point deadline) {
    if (exit_) return exit_;
    for (;;) {
      if (reap(WNOHANG)) return exit_;
      if (Clock::now() >= deadline) return std::nullopt;
      pump(5);
      if (out_eof_) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }

  /// Kills the whole process group and reaps the leader. Safe to call
  /// repeatedly.
  ExitInfo terminate() {
    if (pid_ > 0) {
      ::kill(-pid_, SIGKILL);
      if (!exit_) reap(0);
      ::kill(-pid_, SIGKILL);  // stragglers that outlived the leader
      pid_ = -1;
    }
    stdin_.reset();
    return exit_.value_or(ExitInfo{});
  }

  const std::optional<ExitInfo>& exit_info() const noexcept { return exit_; }
  const std::string& stderr_tail() const noexcept { return err_tail_; }

 private:
  static constexpr std::size_t kStderrKeep = 4096;

  bool reap(int flags) {
    if (exit_) return true;
    int status = 0;
    struct rusage ru {};
    pid_t r;
    do {
      r = ::wait4(pid_, &status, flags, &ru);
    } while (r < 0 && errno == EINTR);
    if (r != pid_) return false;
    ExitInfo info;
    info.exited = WIFEXITED(status);
    info.code = info.exited ? WEXITSTATUS(status) : (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    info.cpu_seconds = static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
                       static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) * 1e-6;
    exit_ = info;
    return true;
  }

  void pump(int timeout_ms) {
    std::array<pollfd, 2> fds{};
    nfds_t n = 0;
    if (stdout_ && !out_eof_) fds[n++] = {stdout_.get(), POLLIN, 0};
    if (stderr_) fds[n++] = {stderr_.get(), POLLIN, 0};
    if (n == 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(timeout_ms));
      return;
    }
    const int rc = ::poll(fds.data(), n, timeout_ms);
    if (rc <= 0) return;
    char buf[65536];
    for (nfds_t i = 0; i < n; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const bool is_out = fds[i].fd == stdout_.get();
      for (;;) {
        const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
        if (got > 0) {
          if (is_out) {
            out_buf_.append(buf, static_cast<std::size_t>(got));
          } else {
            err_tail_.append(buf, static_cast<std::size_t>(got));
            if (err_tail_.size() > kStderrKeep) err_tail_.erase(0, err_tail_.size() - kStderrKeep);
          }
          continue;
        }
        if (got == 0) {
          if (is_out)
            out_eof_ = true;
          else
            stderr_.reset();
        }
        break;  // EAGAIN or EOF
      }
    }
  }

  pid_t pid_ = -1;
  detail::Fd stdin_, stdout_, stderr_;
  std::string out_buf_, err_tail_;
  bool out_eof_ = false;
  std::optional<ExitInfo> exit_;
};

struct CapturedOutput {
  ExitInfo exit;
  std::string out;
  std::string err;
};

/// Runs a command to completion, feeding `input` on stdin and collecting
/// stdout. Returns nullopt on timeout (the process group is killed).
inline std::optional<CapturedOutput> run_capture(const std::vector<std::string>& argv, std::string_view input,
                                                 std::chrono::milliseconds timeout) {
  auto child = ChildProcess::spawn(argv);
  const auto deadline = Clock::now() + timeout;
  // The frontend inputs are small compared to the pipe buffer; writing from a
  // helper thread keeps large inputs from deadlocking against stdout.
  std::thread writer([&child, input] {
    child.write_all(input);
    child.close_stdin();
  });
  auto out = child.read_all(deadline);
  writer.join();
  if (!out) {
    child.terminate();
    return std::nullopt;
  }
  auto info = child.wait_until(deadline);
  if (!info) {
    child.terminate();
    return std::nullopt;
  }
  CapturedOutput res{*info, std::move(*out), child.stderr_tail()};
  child.terminate();
  return res;
}

}  // namespace bag
