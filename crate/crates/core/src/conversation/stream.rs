//! Incremental parsing of a streamed model response: the optional
//! `Addressee: <name>; Response:` header, then sentences split at
//! terminator characters.
//!
//! Every decision is taken only once the buffered text settles it, so the
//! output never depends on how the response was chunked.

const ADDRESSEE_KEY: &str = "Addressee:";
const RESPONSE_KEY: &str = "Response:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Header {
    /// The response carried a header naming this (untrusted) person.
    Named(String),
    Absent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamOutput {
    /// Set once, on the push that settles the header.
    pub header: Option<Header>,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ResponseStream {
    terminators: Vec<char>,
    head: String,
    header: Option<Header>,
    body: String,
    finished: bool,
}

fn starts_with_ci(s: &str, key: &str) -> bool {
    s.get(..key.len()).is_some_and(|p| p.eq_ignore_ascii_case(key))
}

/// `s` could still grow into something starting with `key`.
fn is_prefix_ci(s: &str, key: &str) -> bool {
    s.len() < key.len() && key.get(..s.len()).is_some_and(|k| k.eq_ignore_ascii_case(s))
}

enum Settle<'a> {
    Wait,
    Done(Header, &'a str),
}

fn settle(head: &str, last: bool) -> Settle<'_> {
    let t = head.trim_start();
    if !starts_with_ci(t, ADDRESSEE_KEY) {
        if is_prefix_ci(t, ADDRESSEE_KEY) && !last {
            return Settle::Wait;
        }
        return Settle::Done(Header::Absent, head);
    }
    let after = &t[ADDRESSEE_KEY.len()..];
    let Some(semi) = after.find(';') else {
        return if last {
            Settle::Done(Header::Absent, head)
        } else {
            Settle::Wait
        };
    };
    let name = after[..semi].trim().to_owned();
    let rest = after[semi + 1..].trim_start();
    if starts_with_ci(rest, RESPONSE_KEY) {
        return Settle::Done(Header::Named(name), &rest[RESPONSE_KEY.len()..]);
    }
    if is_prefix_ci(rest, RESPONSE_KEY) && !last {
        return Settle::Wait;
    }
    Settle::Done(Header::Named(name), rest)
}

impl ResponseStream {
    pub fn new(terminators: &[char]) -> Self {
        Self {
            terminators: terminators.to_vec(),
            head: String::new(),
            header: None,
            body: String::new(),
            finished: false,
        }
    }

    pub fn header(&self) -> Option<&Header> {
        self.header.as_ref()
    }

    pub fn push(&mut self, chunk: &str) -> StreamOutput {
        self.advance(chunk, false)
    }

    /// Ends the stream, flushing any unterminated remainder as a sentence.
    pub fn finish(&mut self) -> StreamOutput {
        let mut out = self.advance("", true);
        let rest = std::mem::take(&mut self.body);
        let rest = rest.trim();
        if !rest.is_empty() {
            out.sentences.push(rest.to_owned());
        }
        out
    }

    fn advance(&mut self, chunk: &str, last: bool) -> StreamOutput {
        let mut out = StreamOutput::default();
        if self.finished {
            return out;
        }
        self.finished = last;
        if self.header.is_some() {
            self.body.push_str(chunk);
        } else {
            self.head.push_str(chunk);
            if let Settle::Done(header, body) = settle(&self.head, last) {
                self.body = body.to_owned();
                self.head.clear();
                self.header = Some(header.clone());
                out.header = Some(header);
            }
        }
        out.sentences = self.split_complete();
        out
    }

    fn split_complete(&mut self) -> Vec<String> {
        let mut sentences = Vec::new();
        while let Some(i) = self.body.find(|c| self.terminators.contains(&c)) {
            let end = i + self.body[i..].chars().next().map_or(1, char::len_utf8);
            let piece: String = self.body.drain(..end).collect();
            let piece = piece.trim();
            let content = piece.trim_end_matches(|c| self.terminators.contains(&c));
            if !content.trim().is_empty() {
                sentences.push(piece.to_owned());
            }
        }
        sentences
    }
}

/// Single-pass parse of a complete response.
pub fn split_response(text: &str, terminators: &[char]) -> (Header, Vec<String>) {
    let mut s = ResponseStream::new(terminators);
    let mut sentences = s.push(text).sentences;
    sentences.extend(s.finish().sentences);
    (s.header.unwrap_or(Header::Absent), sentences)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddresseeResult {
    pub addressee: Option<String>,
    pub response_text: String,
    pub parse_ok: bool,
}

/// Matches a header name against the recognised participants, ignoring
/// ASCII case. Returns the participant's canonical spelling.
pub fn match_participant<'a>(name: &str, participants: &'a [String]) -> Option<&'a str> {
    participants
        .iter()
        .find(|p| p.eq_ignore_ascii_case(name))
        .map(String::as_str)
}

/// Header of a complete response. An unknown name is stripped from the
/// text but not trusted.
pub fn parse_addressee(text: &str, participants: &[String]) -> AddresseeResult {
    match settle(text, true) {
        Settle::Done(Header::Named(name), body) => {
            let addressee = match_participant(&name, participants).map(str::to_owned);
            AddresseeResult {
                parse_ok: addressee.is_some(),
                addressee,
                response_text: body.trim().to_owned(),
            }
        }
        _ => AddresseeResult {
            addressee: None,
            response_text: text.trim().to_owned(),
            parse_ok: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: [char; 3] = ['.', '!', '?'];

    fn people() -> Vec<String> {
        vec!["alice".into(), "bob".into()]
    }

    #[test]
    fn splits_across_chunks() {
        let mut s = ResponseStream::new(&T);
        assert!(s.push("Hel").sentences.is_empty());
        let out = s.push("lo! How are you? I");
        assert_eq!(out.header, None);
        assert_eq!(out.sentences, ["Hello!", "How are you?"]);
        let end = s.finish();
        assert_eq!(end.sentences, ["I"]);
    }

    #[test]
    fn header_settles_before_text() {
        let mut s = ResponseStream::new(&T);
        assert_eq!(s.push("Addr").header, None);
        assert_eq!(s.push("essee: alice; Resp").header, None);
        let out = s.push("onse: Nice to meet you! And");
        assert_eq!(out.header, Some(Header::Named("alice".into())));
        assert_eq!(out.sentences, ["Nice to meet you!"]);
    }

    #[test]
    fn empty_sentences_are_discarded() {
        assert_eq!(split_response("...", &T).1, Vec::<String>::new());
        assert_eq!(split_response("Wait... what?!", &T).1, ["Wait.", "what?"]);
    }

    #[test]
    fn addressee_parsing() {
        let ok = parse_addressee("Addressee: alice; Response: Nice to meet you!", &people());
        assert_eq!(
            ok,
            AddresseeResult {
                addressee: Some("alice".into()),
                response_text: "Nice to meet you!".into(),
                parse_ok: true
            }
        );
        let none = parse_addressee("Hello there", &people());
        assert_eq!(
            (none.addressee, none.response_text.as_str(), none.parse_ok),
            (None, "Hello there", false)
        );
        let unknown = parse_addressee("Addressee: carol; Response: Hi", &people());
        assert_eq!(
            (unknown.addressee, unknown.response_text.as_str(), unknown.parse_ok),
            (None, "Hi", false)
        );
        let no_semicolon = parse_addressee("Addressee: alice Response: Hi", &people());
        assert!(!no_semicolon.parse_ok);
        assert_eq!(no_semicolon.response_text, "Addressee: alice Response: Hi");
    }

    #[test]
    fn header_without_response_key() {
        let (h, s) = split_response("Addressee: bob; How was it?", &T);
        assert_eq!(h, Header::Named("bob".into()));
        assert_eq!(s, ["How was it?"]);
    }

    proptest! {
        #[test]
        fn chunking_is_irrelevant(
            text in "(Addressee: [a-z]{0,6}; ?(Resp(onse:)?)? ?)?[A-Za-z ,.!?]{0,60}",
            cuts in prop::collection::vec(0usize..80, 0..8),
        ) {
            let whole = split_response(&text, &T);
            let mut cuts: Vec<usize> = cuts.into_iter().filter(|c| *c <= text.len()).collect();
            cuts.sort_unstable();
            cuts.dedup();
            let mut s = ResponseStream::new(&T);
            let mut header = None;
            let mut sentences = Vec::new();
            let mut prev = 0;
            for c in cuts.into_iter().chain([text.len()]) {
                let out = s.push(&text[prev..c]);
                header = header.or(out.header);
                sentences.extend(out.sentences);
                prev = c;
            }
            let out = s.finish();
            header = header.or(out.header);
            sentences.extend(out.sentences);
            prop_assert_eq!(header.unwrap(), whole.0);
            prop_assert_eq!(sentences, whole.1);
        }
    }
}
