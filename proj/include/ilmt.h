/* C interface to the interleaved-annotation MT toolkit. Every entry point
 * returns a status code; details of the last failure on the calling thread
 * are available from ilmt_last_error(). Strings the library hands out are
 * owned by the caller and released with ilmt_string_free(). */
#ifndef ILMT_H
#define ILMT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ilmt_status {
  ILMT_OK = 0,
  ILMT_ERR_USAGE = 1,    /* bad arguments or configuration */
  ILMT_ERR_DATA = 2,     /* malformed or inconsistent input data */
  ILMT_ERR_DIVERGED = 3, /* training loss became non-finite */
  ILMT_ERR_IO = 4,       /* file could not be read or written */
  ILMT_ERR_INTERNAL = 5
} ilmt_status;

const char* ilmt_version(void);

/* Message for the most recent failure on this thread; "" after success. */
const char* ilmt_last_error(void);

void ilmt_string_free(char* s);

/* Raw-text corpus preparation: tokenize, truecase, drop pairs with a side
 * over max_len words, optionally downsample to `downsample` pairs. Writes
 * src.txt, tgt.txt and the truecasing tables into out_dir. */
ilmt_status ilmt_prep(const char* src_path, const char* tgt_path, const char* out_dir,
                      size_t max_len, size_t downsample, uint64_t seed);

/* Deterministic synthetic parallel corpus with word-level annotations.
 * Writes <out_dir>/<name>.src.conllu and <out_dir>/<name>.tgt.conllu. */
ilmt_status ilmt_synth(const char* out_dir, const char* name, uint64_t seed, size_t pairs);

/* Renders a CoNLL-U file as one token line per sentence. kind selects the
 * interleaved tag before each word: "dum", "pos", "msd", or "none" for the
 * plain surface stream. */
ilmt_status ilmt_annotate(const char* conllu_path, const char* kind, const char* out_path);

/* Subword segmentation. protect_tags != 0 keeps tag tokens atomic (and out
 * of the merge statistics). */
ilmt_status ilmt_bpe_learn(const char* corpus_path, size_t operations, int protect_tags,
                           const char* model_path);
ilmt_status ilmt_bpe_apply(const char* model_path, const char* input_path, int protect_tags,
                           const char* output_path);

/* Trains one model on pre-segmented unit streams (one sentence per line).
 * config_path supplies the model.* and train.* keys; dev references for
 * checkpoint selection are recovered from the dev target stream. log_path
 * may be NULL. */
ilmt_status ilmt_train(const char* config_path, const char* train_src, const char* train_tgt,
                       const char* dev_src, const char* dev_tgt, const char* checkpoint_out,
                       const char* log_path, size_t threads);

typedef struct ilmt_model ilmt_model; /* a loaded checkpoint */

ilmt_status ilmt_model_load(const char* checkpoint_path, ilmt_model** out);
void ilmt_model_free(ilmt_model* model);

/* Checkpoint configuration as `key = value` text (includes the step). */
ilmt_status ilmt_model_config(const ilmt_model* model, char** kv_text);

/* Beam-decodes a file of source unit streams. Writes the raw output units
 * to units_out and the de-segmented, tag-stripped text to text_out; either
 * may be NULL, as may scores_out (id/logprob/length TSV). max_len 0 lets
 * each sentence default to twice its length plus ten. */
ilmt_status ilmt_translate(ilmt_model* model, const char* input_path, size_t beam,
                           size_t max_len, size_t threads, const char* units_out,
                           const char* text_out, const char* scores_out);

/* Forced-decoding diagnostic against annotated references. mode is
 * "force-tags" (reference tags fixed, measures word accuracy),
 * "force-words" (reference words fixed, measures tag accuracy) or
 * "restrict-pos" (tags restricted to the reference POS, measures tag
 * accuracy). tag_kind names the tag vocabulary the model was trained with
 * ("dum", "pos", "msd"); bpe_model_path segments reference words. A
 * non-NULL freq_conllu_path adds frequency-bucket rows from that corpus.
 * The TSV report lands in *report_tsv. */
ilmt_status ilmt_forced_eval(ilmt_model* model, const char* src_units_path,
                             const char* ref_conllu_path, const char* mode,
                             const char* tag_kind, const char* bpe_model_path,
                             const char* freq_conllu_path, size_t beam, size_t threads,
                             char** report_tsv);

/* Corpus BLEU of tokenized hypothesis vs. reference text, as TSV. */
ilmt_status ilmt_eval_bleu(const char* hyp_path, const char* ref_path, char** report_tsv);

/* Paired bootstrap resampling between two hypothesis files. */
ilmt_status ilmt_eval_signif(const char* hyp_a_path, const char* hyp_b_path,
                             const char* ref_path, size_t iterations, double alpha,
                             uint64_t seed, char** report_tsv);

/* Word-error categories of hypotheses against annotated references.
 * lemma_conllu_path supplies the form → lemma table used to lemmatize the
 * hypotheses (typically the training target side). A non-NULL
 * baseline_report_path (an earlier errcat TSV) appends relative changes. */
ilmt_status ilmt_errcat(const char* hyp_path, const char* ref_conllu_path,
                        const char* lemma_conllu_path, const char* baseline_report_path,
                        char** report_tsv);

/* Full experiment (prep → annotate → bpe → train → translate → evaluate →
 * forced) from a config file into run_dir. verbose != 0 prints stage
 * progress to stderr; summary_tsv (may be NULL) receives the headline
 * metrics. */
ilmt_status ilmt_run_experiment(const char* config_path, const char* run_dir, size_t threads,
                                int verbose, char** summary_tsv);

/* Staged search (BPE operations, tied embeddings, sizes) around a baseline
 * config. Stage grids are taken from grid.* keys in the config when given
 * (`grid.bpe_ops = 5000,10000`, `grid.tied = true,false`,
 * `grid.sizes = 512:256,256:256` or dim:layers:heads), otherwise the
 * published grids for the model family. best_config_text receives the
 * winning configuration. */
ilmt_status ilmt_grid_search(const char* config_path, const char* work_dir, size_t threads,
                             int verbose, char** best_config_text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ILMT_H */
