// SPDX-License-Identifier: Apache-2.0
#include "xtal/energy/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "xtal/io/database.hpp"

namespace xtal {

using nlohmann::json;

SubprocessCalculator::SubprocessCalculator(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout)
{
    if (argv_.empty())
        throw Error("subprocess calculator needs a command");
    // A dead child must surface as a write error, not kill the host.
    std::signal(SIGPIPE, SIG_IGN);
}

SubprocessCalculator::~SubprocessCalculator()
{
    std::lock_guard lock(mutex_);
    stop();
}

void SubprocessCalculator::start() const
{
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0)
        throw EvaluationError(std::string("pipe: ") + std::strerror(errno));
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw EvaluationError(std::string("pipe: ") + std::strerror(errno));
    }
    std::vector<char*> args;
    for (const auto& a : argv_)
        args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0)
        throw EvaluationError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
}

void SubprocessCalculator::stop() const
{
    if (to_child_ >= 0)
        close(to_child_);
    if (from_child_ >= 0)
        close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
    buffer_.clear();
}

std::string SubprocessCalculator::read_line() const
{
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0)
            throw EvaluationError("calculator '" + argv_.front() + "' timed out after " +
                                  std::to_string(timeout_.count()) + " ms");
        pollfd pfd{from_child_, POLLIN, 0};
        int rc = poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR)
            continue;
        if (rc < 0)
            throw EvaluationError(std::string("poll: ") + std::strerror(errno));
        if (rc == 0)
            continue;
        char buf[4096];
        ssize_t got = read(from_child_, buf, sizeof buf);
        if (got < 0 && errno == EINTR)
            continue;
        if (got <= 0)
            throw EvaluationError("calculator '" + argv_.front() + "' closed its output");
        buffer_.append(buf, static_cast<std::size_t>(got));
    }
}

Evaluation SubprocessCalculator::evaluate(const CrystalStructure& s) const
{
    std::lock_guard lock(mutex_);
    if (pid_ < 0)
        start();
    std::string request = json{{"structure", structure_to_json(s)}}.dump() + "\n";
    try {
        std::size_t sent = 0;
        while (sent < request.size()) {
            ssize_t w = write(to_child_, request.data() + sent, request.size() - sent);
            if (w < 0 && errno == EINTR)
                continue;
            if (w <= 0)
                throw EvaluationError("calculator '" + argv_.front() + "' is not accepting input");
            sent += static_cast<std::size_t>(w);
        }
        json reply;
        try {
            reply = json::parse(read_line());
        } catch (const json::exception& e) {
            throw EvaluationError(std::string("calculator sent invalid JSON: ") + e.what());
        }
        if (reply.contains("error"))
            throw EvaluationError("calculator reported: " + reply["error"].dump());

        Evaluation out;
        try {
            out.energy = reply.at("energy").get<double>();
            const auto& f = reply.at("forces");
            if (!f.is_array() || f.size() != s.size())
                throw EvaluationError("calculator returned " + std::to_string(f.size()) + " forces for " +
                                      std::to_string(s.size()) + " sites");
            for (const auto& v : f)
                out.forces.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
            if (reply.contains("stress")) {
                const auto& st = reply["stress"];
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b)
                        out.stress(a, b) = st.at(a).at(b).get<double>();
            }
        } catch (const json::exception& e) {
            throw EvaluationError(std::string("calculator reply has wrong shape: ") + e.what());
        }
        return out;
    } catch (const EvaluationError&) {
        // Protocol state is unknown after any failure; start over next time.
        stop();
        throw;
    }
}

} // namespace xtal
