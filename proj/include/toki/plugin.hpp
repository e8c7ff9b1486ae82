#pragma once

// Adapter for classifiers living in another process. The child speaks one
// JSON object per line on stdin/stdout:
//   {"op":"classes"}                          -> {"classes":[...]}
//   {"id":N,"op":"predict","texts":[...]}     -> {"id":N,"probs":[[...],...]}

#include <csignal>
#include <cstdio>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "toki/classifier.hpp"
#include "toki/error.hpp"

namespace toki {

class ExternalPredictor : public Predictor {
public:
    explicit ExternalPredictor(const std::string& command) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (pipe2(to_child, O_CLOEXEC) != 0 || pipe2(from_child, O_CLOEXEC) != 0) throw TransportError(-1, "pipe() failed");
        pid_ = fork();
        if (pid_ < 0) throw TransportError(-1, "fork() failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        out_ = fdopen(to_child[1], "w");
        in_ = fdopen(from_child[0], "r");
        if (!out_ || !in_) throw TransportError(-1, "fdopen() failed");

        try {
            const auto reply = exchange(nlohmann::json{{"op", "classes"}}, 0);
            if (!reply.contains("classes") || !reply["classes"].is_array() || reply["classes"].size() < 2) {
                throw TransportError(0, "handshake reply lacks a \"classes\" array of >= 2 names");
            }
            classes_ = reply["classes"].get<std::vector<std::string>>();
        } catch (...) {
            shutdown();
            throw;
        }
    }

    ExternalPredictor(const ExternalPredictor&) = delete;
    ExternalPredictor& operator=(const ExternalPredictor&) = delete;

    ~ExternalPredictor() override { shutdown(); }

    const std::vector<std::string>& class_names() const override { return classes_; }

    std::vector<ClassDistribution> predict_proba(std::span<const std::string> texts) const override {
        std::lock_guard lock(mu_);
        const long id = ++next_id_;
        nlohmann::json req{{"id", id}, {"op", "predict"}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
        const auto reply = exchange(req, id);
        if (reply.value("id", -1L) != id) throw TransportError(id, "reply id mismatch");
        if (!reply.contains("probs") || !reply["probs"].is_array() || reply["probs"].size() != texts.size()) {
            throw TransportError(id, "reply must carry one probability row per text");
        }
        std::vector<ClassDistribution> out;
        out.reserve(texts.size());
        for (const auto& row : reply["probs"]) {
            if (!row.is_array() || row.size() != classes_.size()) throw TransportError(id, "probability row has wrong width");
            ClassDistribution d;
            double total = 0.0;
            for (const auto& v : row) {
                if (!v.is_number()) throw TransportError(id, "non-numeric probability");
                const double p = v.get<double>();
                if (!(p >= 0.0)) throw TransportError(id, "negative or NaN probability");
                d.probs.push_back(p);
                total += p;
            }
            if (!(total > 0.0)) throw TransportError(id, "probability row sums to zero");
            for (auto& p : d.probs) p /= total;
            out.push_back(std::move(d));
        }
        return out;
    }

private:
    void shutdown() {
        if (out_) std::fclose(out_);
        if (in_) std::fclose(in_);
        out_ = in_ = nullptr;
        if (pid_ > 0) waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }

    nlohmann::json exchange(const nlohmann::json& request, long id) const {
        const std::string line = request.dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), out_) != line.size() || std::fflush(out_) != 0) {
            throw TransportError(id, "write to plugin failed");
        }
        std::string reply;
        int ch;
        while ((ch = std::fgetc(in_)) != EOF && ch != '\n') reply.push_back(static_cast<char>(ch));
        if (reply.empty() && ch == EOF) throw TransportError(id, "plugin closed its output");
        try {
            return nlohmann::json::parse(reply);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(id, std::string("unparseable reply: ") + e.what());
        }
    }

    pid_t pid_ = -1;
    std::FILE* out_ = nullptr;
    std::FILE* in_ = nullptr;
    std::vector<std::string> classes_;
    mutable std::mutex mu_;
    mutable long next_id_ = 0;
};

}  // namespace toki
