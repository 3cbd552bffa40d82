use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! kg_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self, Error> {
                let id = id.into();
                if id.is_empty() || id.chars().any(char::is_whitespace) {
                    return Err(Error::InvalidId(id));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;

            fn try_from(s: String) -> Result<Self, Self::Error> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

kg_id!(
    /// Opaque KG entity identifier (`Q42` by Wikidata convention, not enforced).
    EntityId
);
kg_id!(
    /// Opaque KG property identifier (`P31` by Wikidata convention, not enforced).
    PropertyId
);

/// A single KG edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub property: PropertyId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: EntityId, property: PropertyId, object: EntityId) -> Self {
        Self {
            subject,
            property,
            object,
        }
    }

    /// Parses `subject`, `property`, `object` strings, validating each id.
    pub fn parse(subject: &str, property: &str, object: &str) -> Result<Self, Error> {
        Ok(Self::new(subject.parse()?, property.parse()?, object.parse()?))
    }
}
