"""Canonical prompt template literals.

These strings are the single source of truth for every prompt the pipeline
emits; golden tests pin them byte-for-byte. Bump TEMPLATE_VERSION on any
change so exported training data and run manifests stay traceable.
"""

TEMPLATE_VERSION = 1

# Anchor immediately before the trainable / generated region of the
# post-editing prompts. Training masks everything up to and including it.
POST_EDIT_ANCHOR = "Post-Edited Translation:"

ICL_HEADER = "### INSTRUCTION:\nTranslate the input from English to German.\n\n"
ICL_EXEMPLAR = "###Input: {source}\n####Response: {target}\n\n"
ICL_QUERY = "###Input: {source}\n####Response:"

DIRECT_MT = (
    "[INST] <<SYS>>\n"
    "You are a professional translator from English to German.\n"
    "\n"
    "The output should only be the translation in one line.<</SYS>>\n"
    "\n"
    "English: {source}\n"
    "[/INST]\n"
    "German:"
)

ZERO_SHOT_PE = (
    "[INST] <<SYS>>You are a post-editor. You improve translations from "
    "English to German using the English source and German translation. "
    "Do not provide any explanation or correction. "
    "The translation should end with ### in new line\n"
    "<</SYS>>\n"
    "English: {source}\n"
    "German Translation: {hypothesis}\n"
    "[/INST]\n"
    "Post-Edited Translation:"
)

# Used both at sentence level and, with separator-joined lines, at document
# level. Instruction-free on purpose: these prompts feed fine-tuned backends.
POST_EDIT = (
    "English: {source}\n"
    "German Translation: {hypothesis}\n"
    "Post-Edited Translation:"
)
