// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "xtal/core/errors.hpp"

namespace xtal {

/// Transport or protocol failure talking to a language model.
class BackendError : public Error {
public:
    using Error::Error;
};

struct DecodeParams {
    double temperature = 0.0;
    int max_tokens = 2048;
};

class LanguageBackend {
public:
    virtual ~LanguageBackend() = default;
    virtual std::string complete(const std::string& prompt, const DecodeParams& params = {}) = 0;
    virtual std::string name() const = 0;
};

using BackendPtr = std::shared_ptr<LanguageBackend>;

/// One scripted reply. When expect_substring is non-empty the prompt must
/// contain it, otherwise complete() throws BackendError.
struct ScriptedResponse {
    std::string expect_substring;
    std::string response_text;
};

/// Replays responses in order, one per call. Thread-safe. Running past the end
/// throws BackendError.
class ScriptedBackend final : public LanguageBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptedResponse> responses);

    /// JSON fixture: [{"expect_substring": "...", "response_text": "..."}, ...]
    /// or {"responses": [...]}.
    static ScriptedBackend parse(const std::string& json_text);
    static ScriptedBackend load(const std::string& path);

    std::string complete(const std::string& prompt, const DecodeParams& params = {}) override;
    std::string name() const override { return "scripted"; }

    std::vector<std::string> prompts() const;
    std::size_t remaining() const;

    ScriptedBackend(const ScriptedBackend& other);
    ScriptedBackend& operator=(const ScriptedBackend&) = delete;

private:
    mutable std::mutex mutex_;
    std::vector<ScriptedResponse> responses_;
    std::size_t next_ = 0;
    std::vector<std::string> prompts_;
};

struct HttpBackendConfig {
    /// e.g. "http://127.0.0.1:8080"; requests go to base_url + path.
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    /// Environment variable holding a bearer token; unset or empty means no auth header.
    std::string token_env = "XTAL_API_TOKEN";
    std::chrono::milliseconds timeout{60000};
};

/// Chat-completion style endpoint: POST {"model", "messages": [{"role": "user",
/// "content": prompt}], "temperature", "max_tokens"}; reads
/// choices[0].message.content.
class HttpBackend final : public LanguageBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string complete(const std::string& prompt, const DecodeParams& params = {}) override;
    std::string name() const override { return "http:" + config_.model; }

private:
    HttpBackendConfig config_;
};

} // namespace xtal
