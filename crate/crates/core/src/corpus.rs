//! Example programs shipped with the crate.

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::driver::Domains;
use crate::extract::ExtractionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub name: &'static str,
    pub entry: &'static str,
    /// Symbolic functions besides the entry.
    pub symbolic: &'static [&'static str],
    pub description: &'static str,
    pub source: &'static str,
    /// Longest string the brute-force search tries for this program.
    pub max_string_len: usize,
}

impl Example {
    pub fn config(&self) -> ExtractionConfig {
        ExtractionConfig {
            symbolic_functions: self.symbolic.iter().map(|s| String::from(*s)).collect::<BTreeSet<_>>(),
            ..ExtractionConfig::for_entry(self.entry)
        }
    }

    pub fn domains(&self) -> Domains {
        Domains { max_string_len: self.max_string_len, ..Domains::default() }
    }
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "tutorial",
        entry: "tutorial",
        symbolic: &[],
        description: "two sequential branches where the first updates a variable read by the second",
        source: include_str!("../corpus/tutorial.palm"),
        max_string_len: 4,
    },
    Example {
        name: "palindrome",
        entry: "is_palindrome",
        symbolic: &[],
        description: "palindrome check with a loop and an early return",
        source: include_str!("../corpus/palindrome.palm"),
        max_string_len: 4,
    },
    Example {
        name: "any_int",
        entry: "any_int",
        symbolic: &[],
        description: "integrality test on doubles followed by a sum check",
        source: include_str!("../corpus/any_int.palm"),
        max_string_len: 4,
    },
    Example {
        name: "arg_parse",
        entry: "parseFilePath",
        symbolic: &[],
        description: "command-line scan that takes the argument after -f without validating it",
        source: include_str!("../corpus/arg_parse.palm"),
        max_string_len: 2,
    },
    Example {
        name: "split_words",
        entry: "count_options",
        symbolic: &[],
        description: "split on a separator field and count option-like words through a helper",
        source: include_str!("../corpus/split_words.palm"),
        max_string_len: 4,
    },
    Example {
        name: "pruned",
        entry: "pruned_demo",
        symbolic: &[],
        description: "a branch on local constants that can never be taken",
        source: include_str!("../corpus/pruned.palm"),
        max_string_len: 4,
    },
    Example {
        name: "gcd",
        entry: "gcd",
        symbolic: &[],
        description: "recursive function inlined up to the recursion bound",
        source: include_str!("../corpus/gcd.palm"),
        max_string_len: 4,
    },
];

pub fn example(name: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.name == name)
}
