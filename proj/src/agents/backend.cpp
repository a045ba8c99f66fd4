// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace xtal {

ScriptedBackend::ScriptedBackend(std::vector<ScriptedResponse> responses) : responses_(std::move(responses)) {}

ScriptedBackend::ScriptedBackend(const ScriptedBackend& other)
{
    std::lock_guard lock(other.mutex_);
    responses_ = other.responses_;
    next_ = other.next_;
    prompts_ = other.prompts_;
}

ScriptedBackend ScriptedBackend::parse(const std::string& json_text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scripted backend fixture: ") + e.what(), 0);
    }
    const nlohmann::json& list = j.is_object() ? j.at("responses") : j;
    if (!list.is_array())
        throw ParseError("scripted backend fixture must be an array of responses", 0);
    std::vector<ScriptedResponse> out;
    for (const auto& r : list) {
        if (!r.is_object() || !r.contains("response_text") || !r["response_text"].is_string())
            throw ParseError("scripted response " + std::to_string(out.size()) + " needs a response_text string", 0);
        out.push_back({r.value("expect_substring", ""), r["response_text"].get<std::string>()});
    }
    return ScriptedBackend(std::move(out));
}

ScriptedBackend ScriptedBackend::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ScriptedBackend::complete(const std::string& prompt, const DecodeParams&)
{
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
    if (next_ >= responses_.size())
        throw BackendError("scripted backend exhausted after " + std::to_string(responses_.size()) + " responses");
    const auto& r = responses_[next_];
    if (!r.expect_substring.empty() && prompt.find(r.expect_substring) == std::string::npos)
        throw BackendError("scripted response " + std::to_string(next_) + " expects the prompt to contain \"" +
                           r.expect_substring + "\"");
    ++next_;
    return r.response_text;
}

std::vector<std::string> ScriptedBackend::prompts() const
{
    std::lock_guard lock(mutex_);
    return prompts_;
}

std::size_t ScriptedBackend::remaining() const
{
    std::lock_guard lock(mutex_);
    return responses_.size() - next_;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config))
{
    if (config_.base_url.empty())
        throw Error("HTTP backend needs a base URL");
}

std::string HttpBackend::complete(const std::string& prompt, const DecodeParams& params)
{
    httplib::Client client(config_.base_url);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    nlohmann::json body{{"model", config_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                        {"temperature", params.temperature},
                        {"max_tokens", params.max_tokens}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res)
        throw BackendError("request to " + config_.base_url + config_.path + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError("backend returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed backend response: ") + e.what());
    }
}

} // namespace xtal
