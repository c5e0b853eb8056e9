from pianoadapt.songs.catalog import SONGS, bundled_song, default_finger, key_index, white_ordinal
