#include "dermavqa.h"

#include <exception>
#include <string>

#include <nlohmann/json.hpp>

#include "dermavqa/config.hpp"
#include "dermavqa/pipeline.hpp"

using nlohmann::json;

struct dvqa_engine {
    json config_doc;
    std::filesystem::path base_dir;
    std::string last_error;
    std::string last_manifest;
};

namespace {

dvqa_status_t status_for(const std::exception_ptr& error, dvqa_engine* engine) {
    try {
        std::rethrow_exception(error);
    } catch (const dvqa::Error& e) {
        if (engine) engine->last_error = e.what();
        return e.kind() == dvqa::ErrorKind::ConfigInput ? DVQA_STATUS_CONFIG_ERROR
                                                        : DVQA_STATUS_RUNTIME_ERROR;
    } catch (const std::exception& e) {
        if (engine) engine->last_error = e.what();
        return DVQA_STATUS_RUNTIME_ERROR;
    } catch (...) {
        if (engine) engine->last_error = "unknown error";
        return DVQA_STATUS_RUNTIME_ERROR;
    }
}

template <typename Fn>
dvqa_status_t run_command(dvqa_engine_t* engine, Fn&& fn) {
    if (!engine) return DVQA_STATUS_CONFIG_ERROR;
    engine->last_error.clear();
    try {
        dvqa::PipelineConfig config =
            dvqa::PipelineConfig::from_json(engine->config_doc, engine->base_dir);
        dvqa::Engine impl(std::move(config));
        dvqa::CommandOutput output = fn(impl);
        engine->last_manifest = output.manifest.dump(2);
        return DVQA_STATUS_OK;
    } catch (...) {
        return status_for(std::current_exception(), engine);
    }
}

}  // namespace

extern "C" {

const char* dvqa_version(void) { return dvqa::kVersion; }

dvqa_status_t dvqa_engine_create(const char* config_path, dvqa_engine_t** out) {
    if (!out) return DVQA_STATUS_CONFIG_ERROR;
    *out = nullptr;
    if (!config_path) return DVQA_STATUS_CONFIG_ERROR;
    auto engine = new dvqa_engine();
    try {
        if (!std::filesystem::exists(config_path))
            throw dvqa::ConfigError(std::string("config file not found: ") + config_path);
        engine->config_doc = json::parse(dvqa::read_text_file(config_path), nullptr, false);
        if (engine->config_doc.is_discarded())
            throw dvqa::ConfigError(std::string("config: invalid JSON in ") + config_path);
        engine->base_dir = std::filesystem::absolute(config_path).parent_path();
        dvqa::apply_env_overrides(engine->config_doc);
        // fail fast on malformed configs
        dvqa::PipelineConfig::from_json(engine->config_doc, engine->base_dir).validate();
    } catch (...) {
        dvqa_status_t status = status_for(std::current_exception(), engine);
        *out = engine;  // caller can read last_error, must still destroy
        return status;
    }
    *out = engine;
    return DVQA_STATUS_OK;
}

dvqa_status_t dvqa_engine_create_from_json(const char* config_json, dvqa_engine_t** out) {
    if (!out) return DVQA_STATUS_CONFIG_ERROR;
    *out = nullptr;
    if (!config_json) return DVQA_STATUS_CONFIG_ERROR;
    auto engine = new dvqa_engine();
    try {
        engine->config_doc = json::parse(config_json, nullptr, false);
        if (engine->config_doc.is_discarded())
            throw dvqa::ConfigError("config: invalid JSON document");
        dvqa::apply_env_overrides(engine->config_doc);
        dvqa::PipelineConfig::from_json(engine->config_doc).validate();
    } catch (...) {
        dvqa_status_t status = status_for(std::current_exception(), engine);
        *out = engine;
        return status;
    }
    *out = engine;
    return DVQA_STATUS_OK;
}

void dvqa_engine_destroy(dvqa_engine_t* engine) { delete engine; }

dvqa_status_t dvqa_engine_set_option(dvqa_engine_t* engine, const char* key, const char* value) {
    if (!engine) return DVQA_STATUS_CONFIG_ERROR;
    if (!key || !value) {
        engine->last_error = "set_option: key and value must be non-null";
        return DVQA_STATUS_CONFIG_ERROR;
    }
    try {
        dvqa::set_config_option(engine->config_doc, key, value);
        return DVQA_STATUS_OK;
    } catch (...) {
        return status_for(std::current_exception(), engine);
    }
}

const char* dvqa_engine_last_error(const dvqa_engine_t* engine) {
    return engine ? engine->last_error.c_str() : "null engine";
}

const char* dvqa_engine_last_manifest(const dvqa_engine_t* engine) {
    return engine ? engine->last_manifest.c_str() : "";
}

dvqa_status_t dvqa_preprocess(dvqa_engine_t* engine, const char* split) {
    if (!split) return DVQA_STATUS_CONFIG_ERROR;
    return run_command(engine, [&](dvqa::Engine& impl) { return impl.preprocess(split); });
}

dvqa_status_t dvqa_build_kb(dvqa_engine_t* engine) {
    return run_command(engine, [&](dvqa::Engine& impl) { return impl.build_kb(); });
}

dvqa_status_t dvqa_run(dvqa_engine_t* engine, const char* split) {
    if (!split) return DVQA_STATUS_CONFIG_ERROR;
    return run_command(engine, [&](dvqa::Engine& impl) { return impl.run(split); });
}

dvqa_status_t dvqa_aggregate(dvqa_engine_t* engine, const char* split) {
    if (!split) return DVQA_STATUS_CONFIG_ERROR;
    return run_command(engine, [&](dvqa::Engine& impl) { return impl.aggregate(split); });
}

dvqa_status_t dvqa_evaluate(dvqa_engine_t* engine, const char* split) {
    if (!split) return DVQA_STATUS_CONFIG_ERROR;
    return run_command(engine, [&](dvqa::Engine& impl) { return impl.evaluate(split); });
}

dvqa_status_t dvqa_agreement(dvqa_engine_t* engine, const char* const* names,
                             const char* const* paths, size_t count, int include_gold,
                             const char* split) {
    if (!split || (count > 0 && (!names || !paths))) return DVQA_STATUS_CONFIG_ERROR;
    std::vector<std::pair<std::string, std::string>> submissions;
    for (size_t i = 0; i < count; ++i) {
        if (!names[i] || !paths[i]) return DVQA_STATUS_CONFIG_ERROR;
        submissions.emplace_back(names[i], paths[i]);
    }
    return run_command(engine, [&](dvqa::Engine& impl) {
        return impl.agreement(submissions, include_gold != 0, split);
    });
}

}  // extern "C"
