// SPDX-License-Identifier: Apache-2.0

#include "subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "deadannot/oracle.hpp"

namespace deadannot::detail {
namespace {

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

struct Pipe {
  int read = -1;
  int write = -1;
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
      throw OracleUnavailable(std::string("pipe: ") + std::strerror(errno));
    }
    read = fds[0];
    write = fds[1];
  }
  ~Pipe() {
    close_fd(read);
    close_fd(write);
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
};

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          std::chrono::milliseconds timeout, std::stop_token stop) {
  if (argv.empty()) throw OracleUnavailable("empty command");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  Pipe output;
  Pipe exec_error;

  const pid_t pid = ::fork();
  if (pid < 0) throw OracleUnavailable(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(output.write, STDOUT_FILENO);
    ::dup2(output.write, STDERR_FILENO);
    ::execvp(cargv[0], cargv.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(exec_error.write, &err, sizeof err);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  close_fd(output.write);
  close_fd(exec_error.write);

  // The error pipe closes on successful exec; a payload means exec failed.
  int child_errno = 0;
  ssize_t got;
  do {
    got = ::read(exec_error.read, &child_errno, sizeof child_errno);
  } while (got < 0 && errno == EINTR);
  if (got == static_cast<ssize_t>(sizeof child_errno)) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw OracleUnavailable("cannot run '" + argv[0] + "': " + std::strerror(child_errno));
  }

  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool killed = false;
  char buffer[4096];
  while (output.read >= 0) {
    if (!killed) {
      if (stop.stop_requested()) {
        result.cancelled = true;
      } else if (std::chrono::steady_clock::now() >= deadline) {
        result.timed_out = true;
      }
      if (result.cancelled || result.timed_out) {
        ::kill(-pid, SIGKILL);
        killed = true;
      }
    }
    pollfd pfd{output.read, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 20);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;
    const ssize_t n = ::read(output.read, buffer, sizeof buffer);
    if (n > 0) {
      result.output.append(buffer, static_cast<std::size_t>(n));
    } else if (n == 0 || errno != EINTR) {
      close_fd(output.read);
    }
  }

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = decode_status(status);
  return result;
}

}  // namespace deadannot::detail
