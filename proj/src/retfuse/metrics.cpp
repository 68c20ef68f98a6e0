#include "retfuse/metrics.hpp"

#include <json.hpp>

#include "retfuse/errors.hpp"

namespace retfuse {

double recall_at_k(const torch::Tensor& query_embs, const torch::Tensor& gallery_embs,
                   const std::vector<int64_t>& matches, int64_t k) {
    TORCH_CHECK(query_embs.dim() == 2 && gallery_embs.dim() == 2, "expected [N,d] embeddings");
    TORCH_CHECK(query_embs.size(1) == gallery_embs.size(1), "embedding dims differ");
    const int64_t n = query_embs.size(0);
    const int64_t m = gallery_embs.size(0);
    TORCH_CHECK(static_cast<int64_t>(matches.size()) == n, "matches must cover every query");
    if (k < 1 || k > m) throw KOutOfRange("k=" + std::to_string(k) + " outside gallery size " + std::to_string(m));

    auto sim = torch::matmul(query_embs, gallery_embs.t()).to(torch::kFloat64);
    auto acc = sim.accessor<double, 2>();
    int64_t hits = 0;
    for (int64_t q = 0; q < n; ++q) {
        const double matched_sim = acc[q][matches[q]];
        // rank of the matched item = number of gallery entries strictly better,
        // where "better" is higher similarity or equal similarity at lower index
        int64_t better = 0;
        for (int64_t g = 0; g < m; ++g) {
            if (g == matches[q]) continue;
            if (acc[q][g] > matched_sim || (acc[q][g] == matched_sim && g < matches[q])) ++better;
        }
        if (better < k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

int64_t argmax5(const torch::Tensor& logits_row) {
    auto row = logits_row.to(torch::kFloat64);
    auto acc = row.accessor<double, 1>();
    int64_t best = 0;
    for (int64_t i = 1; i < row.size(0); ++i)
        if (acc[i] > acc[best]) best = i;
    return best;
}

std::string RetrievalReport::to_json() const {
    nlohmann::json j;
    j["protocol"] = protocol;
    j["direction"] = direction;
    nlohmann::json r;
    for (const auto& [k, v] : recall_at) r[std::to_string(k)] = v;
    j["recall_at"] = r;
    j["gallery_size"] = gallery_size;
    j["zero_shot"] = zero_shot;
    return j.dump(2);
}

RetrievalReport RetrievalReport::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    RetrievalReport rep;
    rep.protocol = j.at("protocol").get<std::string>();
    rep.direction = j.at("direction").get<std::string>();
    for (const auto& [k, v] : j.at("recall_at").items())
        rep.recall_at[std::stoi(k)] = v.get<double>();
    rep.gallery_size = j.at("gallery_size").get<int64_t>();
    rep.zero_shot = j.at("zero_shot").get<bool>();
    return rep;
}

std::string ClassificationReport::to_json() const {
    nlohmann::json j;
    j["sdrg_accuracy"] = sdrg_accuracy;
    j["icdr_accuracy"] = icdr_accuracy;
    auto conf = [](const std::array<std::array<int64_t, 5>, 5>& c) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : c) rows.push_back(row);
        return rows;
    };
    j["confusion_sdrg"] = conf(confusion_sdrg);
    j["confusion_icdr"] = conf(confusion_icdr);
    return j.dump(2);
}

ClassificationReport ClassificationReport::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ClassificationReport rep;
    rep.sdrg_accuracy = j.at("sdrg_accuracy").get<double>();
    rep.icdr_accuracy = j.at("icdr_accuracy").get<double>();
    auto conf = [](const nlohmann::json& rows, std::array<std::array<int64_t, 5>, 5>& c) {
        for (size_t r = 0; r < 5; ++r)
            for (size_t col = 0; col < 5; ++col) c[r][col] = rows.at(r).at(col).get<int64_t>();
    };
    conf(j.at("confusion_sdrg"), rep.confusion_sdrg);
    conf(j.at("confusion_icdr"), rep.confusion_icdr);
    return rep;
}

} // namespace retfuse
