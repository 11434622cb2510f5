package corpus.r3.codec;

import java.io.IOException;
import com.fasterxml.jackson.databind.ObjectMapper;

public class ProfileCodec {

    private static final String CHARSET = "UTF-8";

    public Profile decode(String json) {
        ObjectMapper mapper = new ObjectMapper(); // +R3
        try {
            return mapper.readValue(json, Profile.class);
        } catch (IOException e) {
            return null;
        }
    }

    public String encode(Profile profile) {
        ObjectMapper mapper = new ObjectMapper(); // R3 second site of the finding above
        try {
            return mapper.writeValueAsString(profile);
        } catch (IOException e) {
            return "{}";
        }
    }
}
