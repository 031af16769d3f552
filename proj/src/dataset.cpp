#include "xmrt/dataset.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "xmrt/augmentation.hpp"
#include "xmrt/errors.hpp"
#include "xmrt/tensor_file.hpp"

namespace xmrt {

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "unknown";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw DataError("unknown split '" + std::string(name) + "'");
}

void Corpus::validate() const {
    if (audio_features.rows() != audio_ids.size() || audio_split.size() != audio_ids.size()) {
        throw DataError("corpus audio tables disagree in length");
    }
    if (caption_features.rows() != caption_ids.size() || caption_audio.size() != caption_ids.size() ||
        captions.size() != caption_ids.size()) {
        throw DataError("corpus caption tables disagree in length");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : audio_ids)
        if (!seen.insert(id).second) throw DataError("duplicate audio id '" + id + "'");
    seen.clear();
    for (const auto& id : caption_ids)
        if (!seen.insert(id).second) throw DataError("duplicate caption id '" + id + "'");
    for (std::size_t c = 0; c < caption_audio.size(); ++c) {
        if (caption_audio[c] >= audio_ids.size()) throw DataError("caption '" + caption_ids[c] + "' is unpaired");
    }
}

SplitView split_view(const Corpus& corpus, Split split) {
    SplitView v;
    std::vector<std::size_t> local(corpus.audio_count(), SIZE_MAX);
    for (std::size_t a = 0; a < corpus.audio_count(); ++a) {
        if (corpus.audio_split[a] != split) continue;
        local[a] = v.audio.size();
        v.audio.push_back(a);
    }
    for (std::size_t c = 0; c < corpus.caption_count(); ++c) {
        const std::size_t a = corpus.caption_audio[c];
        if (local[a] == SIZE_MAX) continue;
        v.captions.push_back(c);
        v.caption_to_local_audio.push_back(local[a]);
    }
    return v;
}

namespace {

DenseMatrix rows_of(const DenseMatrix& m, const std::vector<std::size_t>& idx) {
    DenseMatrix out(idx.size(), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto src = m.row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace

TrainingSet training_pairs(const Corpus& corpus, const SplitView& view, bool synthetic) {
    std::vector<std::size_t> audio_rows;
    audio_rows.reserve(view.captions.size());
    for (std::size_t c : view.captions) audio_rows.push_back(corpus.caption_audio[c]);
    TrainingSet set;
    set.audio = rows_of(corpus.audio_features, audio_rows);
    set.text = rows_of(corpus.caption_features, view.captions);
    for (std::size_t c : view.captions) set.captions.push_back(corpus.captions[c]);
    set.synthetic.assign(view.captions.size(), synthetic);
    return set;
}

RelevanceMap paired_relevance(const SplitView& view) {
    RelevanceMap r;
    r.gallery_size = view.audio.size();
    for (std::size_t a : view.caption_to_local_audio) r.relevant.push_back({a});
    return r;
}

DenseMatrix gallery_features(const Corpus& corpus, const SplitView& view) {
    return rows_of(corpus.audio_features, view.audio);
}

DenseMatrix query_features(const Corpus& corpus, const SplitView& view) {
    return rows_of(corpus.caption_features, view.captions);
}

namespace {

struct FeatureRef {
    std::string file;
    std::size_t row = 0;
};

FeatureRef parse_ref(const std::string& ref, std::size_t lineno) {
    const auto colon = ref.rfind(':');
    if (colon == std::string::npos || colon + 1 == ref.size()) {
        throw DataError("manifest line " + std::to_string(lineno) + ": ref '" + ref + "' is not <file>:<row>");
    }
    FeatureRef r{ref.substr(0, colon), 0};
    const char* b = ref.data() + colon + 1;
    const char* e = ref.data() + ref.size();
    const auto res = std::from_chars(b, e, r.row);
    if (res.ec != std::errc{} || res.ptr != e) {
        throw DataError("manifest line " + std::to_string(lineno) + ": bad row in ref '" + ref + "'");
    }
    return r;
}

const std::vector<std::string> kManifestColumns{"audio_id", "caption_id", "audio_ref", "caption_ref", "split", "caption"};

}  // namespace

Corpus load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const auto base = path.parent_path();
    std::map<std::string, DenseMatrix> tensors;
    const auto row_of = [&](const FeatureRef& ref, std::size_t lineno) -> std::span<const double> {
        auto it = tensors.find(ref.file);
        if (it == tensors.end()) it = tensors.emplace(ref.file, load_matrix(base / ref.file)).first;
        if (ref.row >= it->second.rows()) {
            throw DataError("manifest line " + std::to_string(lineno) + ": row " + std::to_string(ref.row) +
                            " outside " + ref.file);
        }
        return it->second.row(ref.row);
    };

    Corpus corpus;
    std::unordered_map<std::string, std::size_t> audio_index;
    std::vector<std::string> audio_refs;
    std::vector<double> audio_values, caption_values;
    std::size_t d_audio = 0, d_text = 0;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) f.push_back(field);
        if (!header) {
            if (f != kManifestColumns) throw DataError("manifest header must be: audio_id caption_id audio_ref caption_ref split caption");
            header = true;
            continue;
        }
        if (f.size() == 5) f.emplace_back();
        if (f.size() != kManifestColumns.size()) {
            throw DataError("manifest line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
        }
        const Split split = parse_split(f[4]);
        auto [it, fresh] = audio_index.try_emplace(f[0], corpus.audio_ids.size());
        if (fresh) {
            const auto row = row_of(parse_ref(f[2], lineno), lineno);
            if (d_audio == 0) d_audio = row.size();
            if (row.size() != d_audio) throw DataError("audio feature widths differ across the manifest");
            corpus.audio_ids.push_back(f[0]);
            corpus.audio_split.push_back(split);
            audio_refs.push_back(f[2]);
            audio_values.insert(audio_values.end(), row.begin(), row.end());
        } else {
            if (audio_refs[it->second] != f[2]) {
                throw DataError("manifest line " + std::to_string(lineno) + ": audio '" + f[0] + "' has two feature refs");
            }
            if (corpus.audio_split[it->second] != split) {
                throw DataError("manifest line " + std::to_string(lineno) + ": audio '" + f[0] + "' appears in two splits");
            }
        }
        const auto crow = row_of(parse_ref(f[3], lineno), lineno);
        if (d_text == 0) d_text = crow.size();
        if (crow.size() != d_text) throw DataError("caption feature widths differ across the manifest");
        corpus.caption_ids.push_back(f[1]);
        corpus.caption_audio.push_back(it->second);
        corpus.captions.push_back(split_words(f[5]));
        caption_values.insert(caption_values.end(), crow.begin(), crow.end());
    }
    if (!header) throw DataError("manifest " + path.string() + " is empty");
    corpus.audio_features = DenseMatrix(corpus.audio_ids.size(), d_audio, std::move(audio_values));
    corpus.caption_features = DenseMatrix(corpus.caption_ids.size(), d_text, std::move(caption_values));
    corpus.validate();
    return corpus;
}

void write_manifest(const std::filesystem::path& dir, const Corpus& corpus) {
    corpus.validate();
    std::filesystem::create_directories(dir);
    save_tensor(dir / "audio.xmrt", corpus.audio_features);
    save_tensor(dir / "text.xmrt", corpus.caption_features);
    std::ofstream out(dir / "manifest.tsv", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "manifest.tsv").string());
    for (std::size_t k = 0; k < kManifestColumns.size(); ++k) out << (k ? "\t" : "") << kManifestColumns[k];
    out << '\n';
    for (std::size_t c = 0; c < corpus.caption_count(); ++c) {
        const std::size_t a = corpus.caption_audio[c];
        out << corpus.audio_ids[a] << '\t' << corpus.caption_ids[c] << "\taudio.xmrt:" << a << "\ttext.xmrt:" << c << '\t'
            << to_string(corpus.audio_split[a]) << '\t' << join_words(corpus.captions[c]) << '\n';
    }
}

void append_imported_pairs(TrainingSet& set, const Corpus& imported) {
    if (imported.caption_count() == 0) return;
    if (imported.audio_features.cols() != set.audio.cols() || imported.caption_features.cols() != set.text.cols()) {
        throw DataError("imported pairs have different feature widths from the training set");
    }
    SplitView all;
    for (std::size_t a = 0; a < imported.audio_count(); ++a) all.audio.push_back(a);
    for (std::size_t c = 0; c < imported.caption_count(); ++c) {
        all.captions.push_back(c);
        all.caption_to_local_audio.push_back(imported.caption_audio[c]);
    }
    const TrainingSet extra = training_pairs(imported, all, true);
    const auto concat = [](const DenseMatrix& a, const DenseMatrix& b) {
        std::vector<double> v(a.values().begin(), a.values().end());
        v.insert(v.end(), b.values().begin(), b.values().end());
        return DenseMatrix(a.rows() + b.rows(), a.cols(), std::move(v));
    };
    if (set.synthetic.empty()) set.synthetic.assign(set.size(), false);
    if (set.captions.empty()) set.captions.assign(set.size(), {});
    set.audio = concat(set.audio, extra.audio);
    set.text = concat(set.text, extra.text);
    set.captions.insert(set.captions.end(), extra.captions.begin(), extra.captions.end());
    set.synthetic.insert(set.synthetic.end(), extra.synthetic.begin(), extra.synthetic.end());
}

}  // namespace xmrt
