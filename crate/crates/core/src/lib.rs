pub mod augment;
pub mod corpus;
pub mod critical;
pub mod morphology;
pub mod oracle;
pub mod par;
pub mod wiktionary;
