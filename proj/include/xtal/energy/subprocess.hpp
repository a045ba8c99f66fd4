// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "xtal/energy/calculator.hpp"

namespace xtal {

/// Calculator backed by an external process speaking line-delimited JSON on
/// stdin/stdout. Request: {"structure": {...}}. Response: {"energy", "forces",
/// "stress"} or {"error": "..."}. The process is started lazily and reused;
/// a timeout or protocol error kills it, and the next call starts a fresh one.
class SubprocessCalculator final : public Calculator {
public:
    explicit SubprocessCalculator(std::vector<std::string> argv,
                                  std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~SubprocessCalculator() override;

    SubprocessCalculator(const SubprocessCalculator&) = delete;
    SubprocessCalculator& operator=(const SubprocessCalculator&) = delete;

    Evaluation evaluate(const CrystalStructure& s) const override;
    std::string name() const override { return "subprocess:" + argv_.front(); }
    bool thread_safe() const override { return false; }

private:
    void start() const;
    void stop() const;
    std::string read_line() const;

    std::vector<std::string> argv_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
    mutable int pid_ = -1;
    mutable int to_child_ = -1;
    mutable int from_child_ = -1;
    mutable std::string buffer_;
};

} // namespace xtal
