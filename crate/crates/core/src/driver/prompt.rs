//! Prompt construction for path-specific test generation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::analysis::Analysis;
use crate::ast::Type;
use crate::extract::PathVariant;
use crate::pretty;

use super::PreviousTrial;

/// The editable prompt template. Placeholders: `{entry}`, `{context}`,
/// `{variant}`, `{example}`, `{retry}`.
pub const TEMPLATE: &str = include_str!("prompt.txt");

/// Module fields and every function whose paths are not enumerated. Symbolic
/// functions are inlined into the variant already, so their bodies are left
/// out.
pub fn context_source(analysis: &Analysis) -> String {
    let program = &analysis.program;
    let mut parts: Vec<String> = program.fields.iter().map(pretty::field_text).collect();
    for f in program.functions.iter().filter(|f| !analysis.config.is_symbolic(&f.name)) {
        parts.push(pretty::function_text(f));
    }
    if parts.is_empty() {
        return String::from("// none");
    }
    parts.join("\n").trim_end().into()
}

fn placeholder(ty: &Type) -> String {
    format!("<{ty}>")
}

/// The prompt for the first trial of a path.
pub fn build_prompt(analysis: &Analysis, variant: &PathVariant) -> String {
    let example = match analysis.program.function(&variant.entry) {
        Some(f) => {
            let args: Vec<String> = f.params.iter().map(|p| placeholder(&p.ty)).collect();
            format!("{}({})", f.name, args.join(", "))
        }
        None => format!("{}()", variant.entry),
    };
    let text = TEMPLATE
        .replace("{entry}", &variant.entry)
        .replace("{context}", &context_source(analysis))
        .replace("{variant}", variant.pretty(&analysis.program).trim_end())
        .replace("{example}", &example);
    with_feedback(&text, &[])
}

/// Append the history of failed attempts to a prompt (built or user-edited).
pub fn with_feedback(prompt: &str, previous: &[PreviousTrial]) -> String {
    let base = prompt.replace("{retry}", "");
    let mut out = String::from(base.trim_end());
    out.push('\n');
    if previous.is_empty() {
        return out;
    }
    out.push_str("\nEarlier answers did not follow the path:\n");
    for p in previous {
        out.push_str(&format!("- `{}` failed at `{}`\n", p.test, p.feedback));
    }
    out.push_str("Choose arguments for which that assertion holds as well as all the others.\n");
    out
}

/// Text of the first fenced code block of a reply, without its language
/// tag. Single-line fences such as ```f(1)``` are accepted.
pub fn extract_code_block(reply: &str) -> Option<String> {
    let start = reply.find("```")?;
    let rest = &reply[start + 3..];
    let first_line_end = rest.find('\n').unwrap_or(rest.len());
    if let Some(close) = rest[..first_line_end].find("```") {
        return Some(rest[..close].trim().into());
    }
    let body = rest.get(first_line_end + 1..).unwrap_or("");
    let end = body.find("```").unwrap_or(body.len());
    let code: Vec<&str> = body[..end]
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("//"))
        .collect();
    Some(code.join(" "))
}
